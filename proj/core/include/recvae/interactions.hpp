#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recvae/errors.hpp"

namespace recvae {

struct RawRecord {
  std::string user;
  std::string item;
  double rating;
  std::int64_t timestamp;
};

struct RawInteractions {
  std::vector<RawRecord> records;
};

// Binary implicit-feedback matrix. Rows hold strictly increasing, unique item
// indices; every row is non-empty after preprocessing.
struct InteractionMatrix {
  std::vector<std::string> user_ids;  // index -> external id
  std::vector<std::string> item_ids;
  std::vector<std::vector<std::uint32_t>> rows;

  std::size_t num_users() const { return rows.size(); }
  std::size_t num_items() const { return item_ids.size(); }
  std::size_t interaction_count() const;
};

struct PreprocessConfig {
  double rating_threshold = 4.0;
  std::size_t min_user_interactions = 5;
  std::size_t min_item_interactions = 1;
};

// Parses a MovieLens-style CSV (header userId,itemId,rating,timestamp).
// Malformed rows raise ParseError naming the line; a header-only file yields
// zero records and a warning on stderr.
RawInteractions load_ratings(const std::string& path);

// Keeps interactions with rating >= threshold, deduplicates (user,item)
// pairs, then drops items/users below the minimum counts until the filter
// reaches a fixed point.
InteractionMatrix preprocess(const RawInteractions& raw, const PreprocessConfig& cfg);

}  // namespace recvae
