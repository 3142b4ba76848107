#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "taxrank/profile.hpp"

namespace taxrank {

enum class IncomeScale { Log, Linear };

struct ProfileDistribution {
    std::array<double, 2> income_range = {1.0e4, 2.0e5};
    IncomeScale income_scale = IncomeScale::Log;
    std::array<double, 4> status_weights = {1.0, 1.0, 1.0, 1.0};
    double p_age65 = 0.2;
    double p_blind = 0.2;
    std::array<double, 4> children_weights = {1.0, 1.0, 1.0, 1.0};
    std::array<double, 2> investment_range = {0.0, 0.0};

    void validate() const;
};

// Generator identity recorded in run metadata so results stay replayable.
std::string_view prng_name();

// Deterministic for fixed (dist, seed, n). Draws are independent per index,
// so sample_profiles(d, s, n) is a prefix of sample_profiles(d, s, n + k).
std::vector<TaxpayerProfile> sample_profiles(const ProfileDistribution& dist,
                                             std::uint64_t seed, std::size_t n);

TaxpayerProfile sample_profile_at(const ProfileDistribution& dist,
                                  std::uint64_t seed, std::uint64_t index);

} // namespace taxrank
