#pragma once

#include "d2d/model.hpp"

#include <optional>
#include <string>

namespace d2d {

enum class PolicyId { proposed_exact, proposed_asymptotic, uniform, one_ut };

const char* policy_name(PolicyId id);
std::optional<PolicyId> parse_policy(const std::string& name);

// every group caches at the probe density delta, capped by its user density
CachingStrategy policy_one_ut(const GroupProfile& groups, double delta);

// equal-bias solution reused under the real biases
CachingStrategy policy_uniform(const SystemParams& params, const GroupProfile& groups,
                               double step_x);

}  // namespace d2d
