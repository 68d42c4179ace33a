#include "recvae/interactions.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <unordered_map>

namespace recvae {

std::size_t InteractionMatrix::interaction_count() const {
  std::size_t n = 0;
  for (const auto& row : rows) n += row.size();
  return n;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view field, const char* what, std::size_t line_no) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError(std::string("invalid ") + what + " '" + std::string(field) + "'", line_no);
  return v;
}

std::int64_t parse_int(std::string_view field, const char* what, std::size_t line_no) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError(std::string("invalid ") + what + " '" + std::string(field) + "'", line_no);
  return v;
}

}  // namespace

RawInteractions load_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ratings file: " + path);

  RawInteractions raw;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      saw_header = true;  // header is required by the format; content unchecked
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 4)
      throw ParseError("expected 4 comma-separated fields, got " + std::to_string(fields.size()),
                       line_no);
    if (fields[0].empty() || fields[1].empty())
      throw ParseError("empty user or item id", line_no);
    RawRecord rec;
    rec.user = std::string(fields[0]);
    rec.item = std::string(fields[1]);
    rec.rating = parse_double(fields[2], "rating", line_no);
    rec.timestamp = parse_int(fields[3], "timestamp", line_no);
    raw.records.push_back(std::move(rec));
  }
  if (!saw_header) throw ParseError("missing header line", 1);
  if (raw.records.empty())
    std::cerr << "warning: " << path << " contains a header but no data rows\n";
  return raw;
}

InteractionMatrix preprocess(const RawInteractions& raw, const PreprocessConfig& cfg) {
  // Positive interactions above the rating threshold, deduplicated.
  std::unordered_map<std::string, std::uint32_t> user_index, item_index;
  std::vector<std::string> users, items;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (const auto& rec : raw.records) {
    if (rec.rating < cfg.rating_threshold) continue;
    auto [uit, unew] = user_index.try_emplace(rec.user, static_cast<std::uint32_t>(users.size()));
    if (unew) users.push_back(rec.user);
    auto [iit, inew] = item_index.try_emplace(rec.item, static_cast<std::uint32_t>(items.size()));
    if (inew) items.push_back(rec.item);
    pairs.emplace_back(uit->second, iit->second);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  // Alternate dropping under-supported items and users until stable.
  std::vector<char> user_alive(users.size(), 1), item_alive(items.size(), 1);
  std::vector<std::size_t> user_count(users.size()), item_count(items.size());
  bool changed = true;
  while (changed) {
    changed = false;
    std::fill(user_count.begin(), user_count.end(), 0);
    std::fill(item_count.begin(), item_count.end(), 0);
    for (const auto& [u, i] : pairs) {
      if (!user_alive[u] || !item_alive[i]) continue;
      ++user_count[u];
      ++item_count[i];
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (item_alive[i] && item_count[i] < cfg.min_item_interactions) {
        item_alive[i] = 0;
        changed = true;
      }
    }
    for (std::size_t u = 0; u < users.size(); ++u) {
      if (user_alive[u] && user_count[u] < cfg.min_user_interactions) {
        user_alive[u] = 0;
        changed = true;
      }
    }
  }

  // Re-index the survivors in first-appearance order.
  InteractionMatrix matrix;
  std::vector<std::uint32_t> user_remap(users.size(), UINT32_MAX),
      item_remap(items.size(), UINT32_MAX);
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (!user_alive[u]) continue;
    user_remap[u] = static_cast<std::uint32_t>(matrix.user_ids.size());
    matrix.user_ids.push_back(users[u]);
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!item_alive[i]) continue;
    item_remap[i] = static_cast<std::uint32_t>(matrix.item_ids.size());
    matrix.item_ids.push_back(items[i]);
  }
  matrix.rows.resize(matrix.user_ids.size());
  for (const auto& [u, i] : pairs) {
    if (!user_alive[u] || !item_alive[i]) continue;
    matrix.rows[user_remap[u]].push_back(item_remap[i]);
  }
  for (auto& row : matrix.rows) std::sort(row.begin(), row.end());

  if (matrix.rows.empty())
    throw DataError(
        "preprocessing removed every interaction; relax the rating threshold or the "
        "minimum-interaction filters");
  return matrix;
}

}  // namespace recvae
