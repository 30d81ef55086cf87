#include "pns/config.hpp"

#include <set>

#include "json.hpp"
#include "pns/errors.hpp"

namespace pns {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
    }
  }
}

template <typename T>
void get_num(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_number()) throw ConfigError(std::string(key) + " must be a number");
  out = j[key].get<T>();
}

void get_bool(const json& j, const char* key, bool& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_boolean()) throw ConfigError(std::string(key) + " must be a bool");
  out = j[key].get<bool>();
}

}  // namespace

SimConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config", {"phantom", "features", "uarch", "budgets", "context"});

  SimConfig cfg;
  if (j.contains("phantom")) {
    const json& p = j["phantom"];
    check_keys(p, "phantom", {"n", "delta", "seed"});
    get_num(p, "n", cfg.phantom.n);
    get_num(p, "delta", cfg.phantom.delta);
    get_num(p, "seed", cfg.seed);
  }
  if (j.contains("features")) {
    const json& f = j["features"];
    check_keys(f, "features", {"pns", "traps", "ptrenc", "remap"});
    get_bool(f, "pns", cfg.features.pns);
    get_bool(f, "traps", cfg.features.traps);
    get_bool(f, "ptrenc", cfg.features.ptrenc);
    if (f.contains("remap")) {
      const json& r = f["remap"];
      check_keys(r, "features.remap", {"btb", "itlb", "icache"});
      get_bool(r, "btb", cfg.features.remap.btb);
      get_bool(r, "itlb", cfg.features.remap.itlb);
      get_bool(r, "icache", cfg.features.remap.icache);
    }
  }
  if (j.contains("uarch")) {
    const json& u = j["uarch"];
    check_keys(u, "uarch",
               {"btb_entries", "bdb_entries", "ras_entries", "icache_sets", "icache_ways",
                "icache_line_bytes", "itlb_entries", "mispredict_penalty", "icache_miss_penalty",
                "itlb_miss_penalty", "fetch_extra_cycles", "icache_extra_cycles", "encp_cycles",
                "sds_capacity"});
    get_num(u, "btb_entries", cfg.uarch.btb_entries);
    get_num(u, "bdb_entries", cfg.uarch.bdb_entries);
    get_num(u, "ras_entries", cfg.uarch.ras_entries);
    get_num(u, "icache_sets", cfg.uarch.icache_sets);
    get_num(u, "icache_ways", cfg.uarch.icache_ways);
    get_num(u, "icache_line_bytes", cfg.uarch.icache_line_bytes);
    get_num(u, "itlb_entries", cfg.uarch.itlb_entries);
    get_num(u, "mispredict_penalty", cfg.uarch.mispredict_penalty);
    get_num(u, "icache_miss_penalty", cfg.uarch.icache_miss_penalty);
    get_num(u, "itlb_miss_penalty", cfg.uarch.itlb_miss_penalty);
    get_num(u, "fetch_extra_cycles", cfg.uarch.fetch_extra_cycles);
    get_num(u, "icache_extra_cycles", cfg.uarch.icache_extra_cycles);
    get_num(u, "encp_cycles", cfg.uarch.encp_cycles);
    get_num(u, "sds_capacity", cfg.uarch.sds_capacity);
  }
  if (j.contains("budgets")) {
    const json& b = j["budgets"];
    check_keys(b, "budgets", {"max_cycles", "trials"});
    get_num(b, "max_cycles", cfg.max_cycles);
    get_num(b, "trials", cfg.trials);
  }
  if (j.contains("context")) {
    const json& c = j["context"];
    check_keys(c, "context", {"save_at", "restore_at", "buffer"});
    uint32_t v = 0;
    if (c.contains("save_at")) {
      get_num(c, "save_at", v);
      cfg.ctx_save_at = v;
    }
    if (c.contains("restore_at")) {
      get_num(c, "restore_at", v);
      cfg.ctx_restore_at = v;
    }
    get_num(c, "buffer", cfg.ctx_buffer);
  }

  if (cfg.phantom.n > 8) throw ConfigError("phantom.n must be 0..8");
  if (cfg.phantom.delta == 0 || cfg.phantom.delta % 4 != 0) {
    throw ConfigError("phantom.delta must be a positive multiple of 4");
  }
  if (cfg.max_cycles == 0) throw ConfigError("budgets.max_cycles must be > 0");
  if (cfg.uarch.sds_capacity == 0 || cfg.uarch.sds_capacity % 4 != 0) {
    throw ConfigError("uarch.sds_capacity must be a positive multiple of 4");
  }
  return cfg;
}

std::string config_to_json(const SimConfig& cfg) {
  nlohmann::ordered_json j;
  j["phantom"] = {{"n", cfg.phantom.n}, {"delta", cfg.phantom.delta}, {"seed", cfg.seed}};
  j["features"] = {{"pns", cfg.features.pns},
                   {"traps", cfg.features.traps},
                   {"ptrenc", cfg.features.ptrenc},
                   {"remap",
                    {{"btb", cfg.features.remap.btb},
                     {"itlb", cfg.features.remap.itlb},
                     {"icache", cfg.features.remap.icache}}}};
  j["uarch"] = {{"btb_entries", cfg.uarch.btb_entries},
                {"bdb_entries", cfg.uarch.bdb_entries},
                {"ras_entries", cfg.uarch.ras_entries},
                {"icache_sets", cfg.uarch.icache_sets},
                {"icache_ways", cfg.uarch.icache_ways},
                {"icache_line_bytes", cfg.uarch.icache_line_bytes},
                {"itlb_entries", cfg.uarch.itlb_entries},
                {"mispredict_penalty", cfg.uarch.mispredict_penalty},
                {"icache_miss_penalty", cfg.uarch.icache_miss_penalty},
                {"itlb_miss_penalty", cfg.uarch.itlb_miss_penalty},
                {"fetch_extra_cycles", cfg.uarch.fetch_extra_cycles},
                {"icache_extra_cycles", cfg.uarch.icache_extra_cycles},
                {"encp_cycles", cfg.uarch.encp_cycles},
                {"sds_capacity", cfg.uarch.sds_capacity}};
  j["budgets"] = {{"max_cycles", cfg.max_cycles}, {"trials", cfg.trials}};
  return j.dump(2);
}

}  // namespace pns
