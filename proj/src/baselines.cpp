#include "d2d/baselines.hpp"

#include "d2d/opt_unbiased.hpp"

#include <algorithm>
#include <stdexcept>

namespace d2d {

const char* policy_name(PolicyId id) {
    switch (id) {
        case PolicyId::proposed_exact: return "exact";
        case PolicyId::proposed_asymptotic: return "asymptotic";
        case PolicyId::uniform: return "uniform";
        case PolicyId::one_ut: return "one_ut";
    }
    return "unknown";
}

std::optional<PolicyId> parse_policy(const std::string& name) {
    if (name == "exact") return PolicyId::proposed_exact;
    if (name == "asymptotic") return PolicyId::proposed_asymptotic;
    if (name == "uniform") return PolicyId::uniform;
    if (name == "one_ut") return PolicyId::one_ut;
    return std::nullopt;
}

CachingStrategy policy_one_ut(const GroupProfile& groups, double delta) {
    if (!(delta >= 0.0)) throw std::domain_error("one_ut density must be nonnegative");
    CachingStrategy out;
    out.c.reserve(groups.size());
    for (double lam : groups.lambda) out.c.push_back(std::min(delta, lam));
    return out;
}

CachingStrategy policy_uniform(const SystemParams& params, const GroupProfile& groups,
                               double step_x) {
    if (!(step_x > 0.0)) throw std::domain_error("uniform policy needs a positive stepsize");
    const std::size_t M = groups.size();
    GroupProfile leveled(groups.lambda,
                         std::vector<double>(M, 1.0 / static_cast<double>(M)));
    return solve_unbiased(params, leveled, step_x).c_star;
}

}  // namespace d2d
