#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "pns/phantom.hpp"

namespace pns {

// true = index/tag by archetype VA, false = by raw extended pc (the
// naive-name-confusion mode, capacity divided across phantoms).
struct RemapToggles {
  bool btb = true;
  bool itlb = true;
  bool icache = true;
};

// Desk-scale geometry: small enough that capacity effects show up in
// hundred-instruction programs. Penalties are config defaults; tests assert
// relative orderings only.
struct UarchConfig {
  unsigned btb_entries = 64;
  unsigned bdb_entries = 1024;
  unsigned ras_entries = 8;
  unsigned icache_sets = 16;
  unsigned icache_ways = 2;
  unsigned icache_line_bytes = 16;
  unsigned itlb_entries = 8;
  uint64_t mispredict_penalty = 8;
  uint64_t icache_miss_penalty = 15;
  uint64_t itlb_miss_penalty = 20;
  uint64_t fetch_extra_cycles = 0;
  uint64_t icache_extra_cycles = 0;
  uint64_t encp_cycles = 8;
  unsigned sds_capacity = 256;
};

struct BtbLookup {
  bool hit = false;  // the control-flow signal s
  ExtendedPC predicted{};
};

// Direct-mapped branch target buffer. Stored targets are the
// selector-randomized next pcs installed at commit.
class Btb {
 public:
  explicit Btb(unsigned entries) : entries_(entries) {}

  BtbLookup access(uint64_t key) {
    ++lookups;
    if (record_touched) ++touched[key];
    const Entry& e = entries_[index(key)];
    if (e.valid && e.tag == key) {
      ++hits;
      return {true, e.target};
    }
    return {false, {}};
  }

  void update(uint64_t key, ExtendedPC target) {
    Entry& e = entries_[index(key)];
    e.valid = true;
    e.tag = key;
    e.target = target;
  }

  uint64_t lookups = 0, hits = 0;
  bool record_touched = false;
  std::map<uint64_t, uint64_t> touched;

 private:
  struct Entry {
    bool valid = false;
    uint64_t tag = 0;
    ExtendedPC target{};
  };
  size_t index(uint64_t key) const { return (key >> 2) % entries_.size(); }
  std::vector<Entry> entries_;
};

// Branch direction buffer: 2-bit saturating counters, always indexed by the
// archetype VA so direction state is shared by all phantoms.
class Bdb {
 public:
  explicit Bdb(unsigned entries) : counters_(entries, 0) {}

  bool predict_taken(uint32_t va) const { return counters_[index(va)] >= 2; }

  void update(uint32_t va, bool taken) {
    uint8_t& c = counters_[index(va)];
    if (taken && c < 3) ++c;
    if (!taken && c > 0) --c;
  }

  const std::vector<uint8_t>& counters() const { return counters_; }

 private:
  size_t index(uint32_t va) const { return (va >> 2) % counters_.size(); }
  std::vector<uint8_t> counters_;
};

// Return address stack: prediction only; architectural RET correctness never
// depends on it.
class Ras {
 public:
  explicit Ras(unsigned entries) : slots_(entries) {}

  void push(ExtendedPC epc) {
    top_ = (top_ + 1) % slots_.size();
    slots_[top_] = epc;
    if (count_ < slots_.size()) ++count_;
  }

  std::optional<ExtendedPC> pop() {
    if (count_ == 0) return std::nullopt;
    ExtendedPC e = slots_[top_];
    top_ = (top_ + slots_.size() - 1) % slots_.size();
    --count_;
    return e;
  }

 private:
  std::vector<ExtendedPC> slots_;
  size_t top_ = 0;
  size_t count_ = 0;
};

// Set-associative instruction cache, LRU.
class ICache {
 public:
  ICache(unsigned sets, unsigned ways, unsigned line_bytes)
      : sets_(sets), ways_(ways), line_(line_bytes), entries_(sets * ways) {}

  bool access(uint64_t key) {
    uint64_t line_key = key / line_;
    if (record_touched) ++touched[line_key];
    size_t set = static_cast<size_t>(line_key % sets_);
    Entry* base = &entries_[set * ways_];
    ++tick_;
    for (unsigned w = 0; w < ways_; ++w) {
      if (base[w].valid && base[w].tag == line_key) {
        base[w].lru = tick_;
        ++hits;
        return true;
      }
    }
    ++misses;
    Entry* victim = nullptr;
    for (unsigned w = 0; w < ways_; ++w) {
      if (!base[w].valid) {
        victim = &base[w];
        break;
      }
    }
    if (!victim) {
      victim = base;
      for (unsigned w = 1; w < ways_; ++w) {
        if (base[w].lru < victim->lru) victim = &base[w];
      }
    }
    victim->valid = true;
    victim->tag = line_key;
    victim->lru = tick_;
    return false;
  }

  uint64_t hits = 0, misses = 0;
  bool record_touched = false;
  std::map<uint64_t, uint64_t> touched;

 private:
  struct Entry {
    bool valid = false;
    uint64_t tag = 0;
    uint64_t lru = 0;
  };
  unsigned sets_, ways_, line_;
  std::vector<Entry> entries_;
  uint64_t tick_ = 0;
};

// Fully associative instruction TLB over 4 KiB pages, LRU. Physical addresses
// are identity-mapped (no OS); the structure models reach only.
class Itlb {
 public:
  explicit Itlb(unsigned entries) : entries_(entries) {}

  bool access(uint64_t key) {
    uint64_t page = key >> 12;
    if (record_touched) ++touched[page];
    ++tick_;
    for (auto& e : entries_) {
      if (e.valid && e.page == page) {
        e.lru = tick_;
        ++hits;
        return true;
      }
    }
    ++misses;
    Entry* victim = &entries_[0];
    for (auto& e : entries_) {
      if (!e.valid) {
        victim = &e;
        break;
      }
      if (e.lru < victim->lru) victim = &e;
    }
    victim->valid = true;
    victim->page = page;
    victim->lru = tick_;
    return false;
  }

  uint64_t hits = 0, misses = 0;
  bool record_touched = false;
  std::map<uint64_t, uint64_t> touched;

 private:
  struct Entry {
    bool valid = false;
    uint64_t page = 0;
    uint64_t lru = 0;
  };
  std::vector<Entry> entries_;
  uint64_t tick_ = 0;
};

}  // namespace pns
