#pragma once

#include <string>
#include <string_view>

#include "wave/error.hpp"

namespace wave {

enum class FamilyKind {
    Wentzell,  ///< single strip field, tangential diffusion on y = 0 weighted by s in [0,1]
    Exchange,  ///< strip field coupled to a line field with exchange rate 1/epsilon, epsilon in (0,1]
};

inline std::string_view to_string(FamilyKind k) { return k == FamilyKind::Wentzell ? "Wentzell" : "Exchange"; }

inline FamilyKind family_kind_from_string(std::string_view s) {
    if (s == "Wentzell") return FamilyKind::Wentzell;
    if (s == "Exchange") return FamilyKind::Exchange;
    throw Error(ErrorCode::Validation, "unknown family '" + std::string(s) + "'");
}

/// Which problem is being solved, together with its homotopy parameter.
class HomotopyFamily {
public:
    static HomotopyFamily wentzell(double s) {
        if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::InvalidArgument, "Wentzell parameter s must lie in [0,1]");
        return HomotopyFamily(FamilyKind::Wentzell, s);
    }
    static HomotopyFamily exchange(double epsilon) {
        if (!(epsilon > 0.0 && epsilon <= 1.0))
            throw Error(ErrorCode::InvalidArgument, "exchange parameter epsilon must lie in (0,1]");
        return HomotopyFamily(FamilyKind::Exchange, epsilon);
    }
    static HomotopyFamily make(FamilyKind kind, double parameter) {
        return kind == FamilyKind::Wentzell ? wentzell(parameter) : exchange(parameter);
    }

    [[nodiscard]] FamilyKind kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_exchange() const noexcept { return kind_ == FamilyKind::Exchange; }
    [[nodiscard]] double parameter() const noexcept { return parameter_; }
    [[nodiscard]] double s() const noexcept { return kind_ == FamilyKind::Wentzell ? parameter_ : 1.0; }
    [[nodiscard]] double epsilon() const noexcept { return kind_ == FamilyKind::Exchange ? parameter_ : 0.0; }
    /// Exchange rate M = 1/epsilon.
    [[nodiscard]] double exchange_rate() const noexcept { return 1.0 / parameter_; }

    [[nodiscard]] HomotopyFamily with_parameter(double p) const { return make(kind_, p); }

    friend bool operator==(const HomotopyFamily&, const HomotopyFamily&) = default;

private:
    HomotopyFamily(FamilyKind kind, double parameter) : kind_(kind), parameter_(parameter) {}

    FamilyKind kind_;
    double parameter_;
};

} // namespace wave
