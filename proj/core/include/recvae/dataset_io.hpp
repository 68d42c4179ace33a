#pragma once

#include <cstdint>
#include <string>

#include "recvae/interactions.hpp"

namespace recvae {

// Provenance recorded next to the bundle as a plain-text manifest.
struct DatasetManifest {
  std::uint64_t seed = 0;
  double rating_threshold = 0;
  std::size_t min_user_interactions = 0;
  std::size_t min_item_interactions = 0;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
};

// Binary dataset bundle, little-endian throughout:
//   magic "RVDS", format version u16,
//   u32 user count, u32 item count,
//   user ids then item ids as u32-length-prefixed UTF-8 strings,
//   one row per user as a u32-length-prefixed array of u32 item indices.
void write_dataset(const std::string& path, const InteractionMatrix& matrix);
InteractionMatrix read_dataset(const std::string& path);

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

}  // namespace recvae
