/* Copyright 2026 The rqsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rqsim/workload.h"

namespace rqsim {

struct InsertResult {
  std::size_t evicted_blocks = 0;
  std::size_t new_blocks = 0;
  // The whole sequence did not fit; only its longest fitting prefix is resident.
  bool truncated = false;
};

// Block-granular prefix cache. Blocks form a trie: a block is resident only
// if its parent block is. Eviction picks the least recently used *leaf*, so
// the trie stays prefix-closed. Partial trailing blocks are never cached.
class PrefixCache {
 public:
  explicit PrefixCache(std::uint32_t block_size = 16,
                       std::size_t capacity_blocks = 4096);

  std::uint32_t block_size() const { return block_size_; }
  std::size_t capacity_blocks() const { return capacity_blocks_; }
  std::size_t resident_blocks() const { return resident_; }

  // tok - block_size * (leading whole blocks resident). Refreshes the
  // recency of the matched blocks; residency is unchanged.
  std::uint32_t match_uncached(std::span<const Token> tokens);
  // Same count without touching recency.
  std::uint32_t peek_uncached(std::span<const Token> tokens) const;

  // Makes every whole block of `tokens` resident, evicting LRU leaves that are
  // not on the inserted path.
  InsertResult insert(std::span<const Token> tokens);

  // Structural self-check used by tests: prefix closure, capacity, child
  // counts and the evictable-leaf index all agree.
  bool check_invariants() const;

 private:
  using NodeId = std::uint32_t;
  static constexpr NodeId kRoot = 0;

  struct Node {
    NodeId parent = kRoot;
    std::uint32_t children = 0;
    std::uint64_t last_access = 0;
    std::uint64_t block_hash = 0;
    std::vector<Token> block;
    bool alive = false;
  };

  struct Key {
    NodeId parent;
    std::uint64_t block_hash;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };

  // Returns the child of `parent` holding `block`, or kRoot if absent.
  NodeId find_child(NodeId parent, std::span<const Token> block,
                    std::uint64_t block_hash) const;
  void touch(NodeId id);
  bool evict_one(NodeId protect);
  NodeId allocate();

  std::uint32_t block_size_;
  std::size_t capacity_blocks_;
  std::size_t resident_ = 0;
  std::uint64_t clock_ = 0;
  std::vector<Node> nodes_;
  std::vector<NodeId> free_;
  std::unordered_map<Key, NodeId, KeyHash> index_;
  // (last_access, id) for resident nodes without resident children.
  std::set<std::pair<std::uint64_t, NodeId>> leaves_;
};

struct CacheMissRatio {
  RelQueryId rel_id = 0;
  double ratio = 1.0;  // in [0, 1]
  std::uint64_t computed_at_iteration = 0;
};

// Σ utok / Σ tok over min(sample_size, |candidates|) candidates drawn
// uniformly without replacement. Does not refresh cache recency.
CacheMissRatio sample_cache_miss_ratio(
    const PrefixCache& cache, RelQueryId rel_id,
    std::span<const std::span<const Token>> candidates, std::size_t sample_size,
    std::mt19937_64& rng, std::uint64_t iteration = 0);

// Convenience overload sampling over all requests of a relQuery.
CacheMissRatio sample_cache_miss_ratio(const PrefixCache& cache,
                                       const RelQuery& relquery,
                                       std::size_t sample_size,
                                       std::mt19937_64& rng,
                                       std::uint64_t iteration = 0);

// round(tok * ratio), half up; never exceeds tok.
std::uint32_t utok_approx(std::uint32_t tok, double ratio);

}  // namespace rqsim
