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

#include "rqsim/prefix_cache.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal/hashing.h"
#include "rqsim/errors.h"

namespace rqsim {

namespace {

std::uint64_t hash_block(std::span<const Token> block) {
  std::uint64_t h = internal::kFnvOffset;
  for (Token t : block) h = internal::hash_combine(h, t);
  return h;
}

}  // namespace

std::size_t PrefixCache::KeyHash::operator()(const Key& k) const noexcept {
  return static_cast<std::size_t>(internal::hash_combine(k.block_hash, k.parent));
}

PrefixCache::PrefixCache(std::uint32_t block_size, std::size_t capacity_blocks)
    : block_size_(block_size), capacity_blocks_(capacity_blocks) {
  if (block_size_ == 0) throw ConfigError("block_size must be positive");
  nodes_.emplace_back();
  nodes_[kRoot].alive = true;
}

PrefixCache::NodeId PrefixCache::find_child(NodeId parent,
                                            std::span<const Token> block,
                                            std::uint64_t block_hash) const {
  const auto it = index_.find(Key{parent, block_hash});
  if (it == index_.end()) return kRoot;
  const Node& node = nodes_[it->second];
  // A 64-bit hash collision between different blocks is treated as a miss.
  if (!std::equal(block.begin(), block.end(), node.block.begin(), node.block.end())) {
    return kRoot;
  }
  return it->second;
}

void PrefixCache::touch(NodeId id) {
  Node& node = nodes_[id];
  if (node.children == 0) leaves_.erase({node.last_access, id});
  node.last_access = ++clock_;
  if (node.children == 0) leaves_.insert({node.last_access, id});
}

std::uint32_t PrefixCache::match_uncached(std::span<const Token> tokens) {
  const std::size_t whole = tokens.size() / block_size_;
  NodeId cur = kRoot;
  std::size_t matched = 0;
  for (; matched < whole; ++matched) {
    const auto block = tokens.subspan(matched * block_size_, block_size_);
    const NodeId next = find_child(cur, block, hash_block(block));
    if (next == kRoot) break;
    touch(next);
    cur = next;
  }
  return static_cast<std::uint32_t>(tokens.size() - matched * block_size_);
}

std::uint32_t PrefixCache::peek_uncached(std::span<const Token> tokens) const {
  const std::size_t whole = tokens.size() / block_size_;
  NodeId cur = kRoot;
  std::size_t matched = 0;
  for (; matched < whole; ++matched) {
    const auto block = tokens.subspan(matched * block_size_, block_size_);
    const NodeId next = find_child(cur, block, hash_block(block));
    if (next == kRoot) break;
    cur = next;
  }
  return static_cast<std::uint32_t>(tokens.size() - matched * block_size_);
}

PrefixCache::NodeId PrefixCache::allocate() {
  if (!free_.empty()) {
    const NodeId id = free_.back();
    free_.pop_back();
    return id;
  }
  nodes_.emplace_back();
  return static_cast<NodeId>(nodes_.size() - 1);
}

bool PrefixCache::evict_one(NodeId protect) {
  for (auto it = leaves_.begin(); it != leaves_.end(); ++it) {
    const NodeId victim = it->second;
    if (victim == protect) continue;
    leaves_.erase(it);
    Node& node = nodes_[victim];
    index_.erase(Key{node.parent, node.block_hash});
    Node& parent = nodes_[node.parent];
    --parent.children;
    if (node.parent != kRoot && parent.children == 0) {
      leaves_.insert({parent.last_access, node.parent});
    }
    node = Node{};
    free_.push_back(victim);
    --resident_;
    return true;
  }
  return false;
}

InsertResult PrefixCache::insert(std::span<const Token> tokens) {
  InsertResult result;
  const std::size_t whole = tokens.size() / block_size_;
  NodeId cur = kRoot;
  for (std::size_t b = 0; b < whole; ++b) {
    const auto block = tokens.subspan(b * block_size_, block_size_);
    const std::uint64_t h = hash_block(block);
    const NodeId existing = find_child(cur, block, h);
    if (existing != kRoot) {
      touch(existing);
      cur = existing;
      continue;
    }
    if (index_.count(Key{cur, h}) != 0) {
      // Hash collision with a different resident block; stop here.
      result.truncated = true;
      break;
    }
    while (resident_ >= capacity_blocks_) {
      if (!evict_one(cur)) break;
      ++result.evicted_blocks;
    }
    if (resident_ >= capacity_blocks_) {
      result.truncated = true;
      break;
    }
    const NodeId id = allocate();
    Node& node = nodes_[id];
    node.parent = cur;
    node.block.assign(block.begin(), block.end());
    node.block_hash = h;
    node.alive = true;
    node.last_access = ++clock_;
    Node& parent = nodes_[cur];
    if (cur != kRoot && parent.children == 0) leaves_.erase({parent.last_access, cur});
    ++parent.children;
    leaves_.insert({node.last_access, id});
    index_.emplace(Key{cur, h}, id);
    ++resident_;
    ++result.new_blocks;
    cur = id;
  }
  return result;
}

bool PrefixCache::check_invariants() const {
  if (resident_ > capacity_blocks_) return false;
  std::vector<std::uint32_t> counted(nodes_.size(), 0);
  std::size_t alive = 0;
  for (NodeId id = 1; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (!node.alive) continue;
    ++alive;
    if (!nodes_[node.parent].alive) return false;  // prefix closure
    ++counted[node.parent];
    const auto it = index_.find(Key{node.parent, node.block_hash});
    if (it == index_.end() || it->second != id) return false;
  }
  if (alive != resident_ || index_.size() != resident_) return false;
  std::size_t leaf_count = 0;
  for (NodeId id = 1; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (!node.alive) continue;
    if (counted[id] != node.children) return false;
    const bool indexed = leaves_.count({node.last_access, id}) != 0;
    if ((node.children == 0) != indexed) return false;
    leaf_count += node.children == 0;
  }
  return leaf_count == leaves_.size();
}

CacheMissRatio sample_cache_miss_ratio(
    const PrefixCache& cache, RelQueryId rel_id,
    std::span<const std::span<const Token>> candidates, std::size_t sample_size,
    std::mt19937_64& rng, std::uint64_t iteration) {
  CacheMissRatio out;
  out.rel_id = rel_id;
  out.computed_at_iteration = iteration;
  if (candidates.empty()) return out;
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t take = std::min(std::max<std::size_t>(sample_size, 1), order.size());
  // Partial Fisher-Yates: the first `take` slots are a uniform sample.
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::uint64_t uncached = 0;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < take; ++i) {
    const auto tokens = candidates[order[i]];
    uncached += cache.peek_uncached(tokens);
    total += tokens.size();
  }
  out.ratio = total == 0 ? 1.0 : static_cast<double>(uncached) / static_cast<double>(total);
  return out;
}

CacheMissRatio sample_cache_miss_ratio(const PrefixCache& cache,
                                       const RelQuery& relquery,
                                       std::size_t sample_size,
                                       std::mt19937_64& rng,
                                       std::uint64_t iteration) {
  std::vector<std::span<const Token>> spans;
  spans.reserve(relquery.requests.size());
  for (const auto& req : relquery.requests) spans.emplace_back(req.tokens);
  return sample_cache_miss_ratio(cache, relquery.rel_id, spans, sample_size, rng,
                                 iteration);
}

std::uint32_t utok_approx(std::uint32_t tok, double ratio) {
  const double clamped = std::clamp(ratio, 0.0, 1.0);
  const auto v = static_cast<std::uint64_t>(std::floor(tok * clamped + 0.5));
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(v, tok));
}

}  // namespace rqsim
