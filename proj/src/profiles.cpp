#include "taxrank/profiles.hpp"

#include <cmath>
#include <random>

#include "taxrank/errors.hpp"

namespace taxrank {

namespace {

// splitmix64 finalizer; seeds one independent engine per profile index.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform in [0,1) from the top 53 bits; distributions are hand-mapped
// because the standard library ones are not bit-identical across vendors.
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <std::size_t N>
std::size_t weighted_pick(std::mt19937_64& rng, const std::array<double, N>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double target = next_unit(rng) * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        cum += weights[i];
        if (target < cum) return i;
    }
    return N - 1; // target landed on the trailing rounding sliver
}

} // namespace

void ProfileDistribution::validate() const {
    auto check_range = [](const std::array<double, 2>& r, const char* what) {
        if (!std::isfinite(r[0]) || !std::isfinite(r[1]) || r[0] > r[1] || r[0] < 0.0) {
            throw ValidationError(std::string(what) + " range must satisfy 0 <= lo <= hi");
        }
    };
    check_range(income_range, "income");
    check_range(investment_range, "investment income");
    if (income_scale == IncomeScale::Log && income_range[0] <= 0.0 &&
        income_range[0] != income_range[1]) {
        throw ValidationError("log-scale income sampling needs a positive lower bound");
    }
    auto check_weights = [](const auto& w, const char* what) {
        double total = 0.0;
        for (double v : w) {
            if (!std::isfinite(v) || v < 0.0) {
                throw ValidationError(std::string(what) + " weights must be nonnegative");
            }
            total += v;
        }
        if (!(total > 0.0)) {
            throw ValidationError(std::string(what) + " weights must sum to a positive value");
        }
    };
    check_weights(status_weights, "status");
    check_weights(children_weights, "children");
    if (p_age65 < 0.0 || p_age65 > 1.0 || p_blind < 0.0 || p_blind > 1.0) {
        throw ValidationError("flag probabilities must lie in [0,1]");
    }
}

std::string_view prng_name() {
    return "mt19937_64 (one splitmix64-seeded stream per profile index)";
}

TaxpayerProfile sample_profile_at(const ProfileDistribution& dist, std::uint64_t seed,
                                  std::uint64_t index) {
    std::mt19937_64 rng(mix64(seed ^ mix64(index)));

    TaxpayerProfile p;

    const double lo = dist.income_range[0];
    const double hi = dist.income_range[1];
    const double u_income = next_unit(rng);
    if (lo == hi) {
        p.income = lo;
    } else if (dist.income_scale == IncomeScale::Log) {
        p.income = std::exp(std::log(lo) + u_income * (std::log(hi) - std::log(lo)));
    } else {
        p.income = lo + u_income * (hi - lo);
    }

    p.status = kAllStatuses[weighted_pick(rng, dist.status_weights)];
    p.age_65_or_older = next_unit(rng) < dist.p_age65;
    p.blind = next_unit(rng) < dist.p_blind;
    p.qualifying_children = static_cast<int>(weighted_pick(rng, dist.children_weights));

    const double ilo = dist.investment_range[0];
    const double ihi = dist.investment_range[1];
    p.investment_income = ilo == ihi ? ilo : ilo + next_unit(rng) * (ihi - ilo);

    p.validate();
    return p;
}

std::vector<TaxpayerProfile> sample_profiles(const ProfileDistribution& dist,
                                             std::uint64_t seed, std::size_t n) {
    if (n < 1) {
        throw ValidationError("sample_profiles needs n >= 1");
    }
    dist.validate();
    std::vector<TaxpayerProfile> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(sample_profile_at(dist, seed, i));
    }
    return out;
}

} // namespace taxrank
