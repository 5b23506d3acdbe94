#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsmdp/features.hpp"
#include "fsmdp/mdp.hpp"
#include "fsmdp/trace.hpp"

namespace fsmdp {

// JSON documents with stable key order and shortest round-trip numbers, so
// identical objects serialize to identical bytes. Schemas are described in
// the README.

std::string mdp_to_json(const FastSlowMdp& mdp);
FastSlowMdp mdp_from_json(const std::string& text);

std::string policy_to_json(const AnyPolicy& policy);
AnyPolicy policy_from_json(const std::string& text);

std::string features_to_json(const FeatureModel& fm);

std::string trace_to_json(const SolveTrace& trace);

void write_file(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

/// FNV-1a of the canonical serialization, as a hex string.
std::string fnv1a_hex(const std::string& text);

std::string code_version();

}  // namespace fsmdp
