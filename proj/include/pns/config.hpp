#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "pns/phantom.hpp"
#include "pns/uarch.hpp"

namespace pns {

struct FeatureFlags {
  bool pns = true;
  bool traps = true;
  bool ptrenc = true;
  RemapToggles remap;
};

struct SimConfig {
  PhantomConfig phantom;  // n = 8, delta = 4
  uint64_t seed = 1;
  FeatureFlags features;
  UarchConfig uarch;
  uint64_t max_cycles = 1'000'000;
  uint64_t trials = 100'000;

  // context hooks ("CLI-injected runtime calls"): perform save/restore when
  // the pc reaches these archetype addresses
  std::optional<uint32_t> ctx_save_at;
  std::optional<uint32_t> ctx_restore_at;
  uint32_t ctx_buffer = 0;

  // test/diagnostic knobs (not part of the config document)
  std::optional<uint8_t> forced_domain;  // pin every selector draw
  bool trace_uarch = false;              // record touched-index multisets
  bool record_traces = false;            // committed-VA and extended-pc traces

  unsigned effective_n() const { return features.pns ? phantom.n : 0; }
};

/// Parses the config document; unknown keys are rejected (ConfigError).
SimConfig parse_config(const std::string& json_text);
std::string config_to_json(const SimConfig& cfg);

}  // namespace pns
