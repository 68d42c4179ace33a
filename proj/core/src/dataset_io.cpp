#include "recvae/dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace recvae {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::ostream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) throw FormatError("dataset bundle truncated");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("dataset bundle truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::string get_string(std::istream& in) {
  const std::uint32_t len = get_u32(in);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw FormatError("dataset bundle truncated");
  return s;
}

}  // namespace

void write_dataset(const std::string& path, const InteractionMatrix& matrix) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset bundle: " + path);
  out.write(kMagic, 4);
  put_u16(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(matrix.user_ids.size()));
  put_u32(out, static_cast<std::uint32_t>(matrix.item_ids.size()));
  for (const auto& id : matrix.user_ids) put_string(out, id);
  for (const auto& id : matrix.item_ids) put_string(out, id);
  for (const auto& row : matrix.rows) {
    put_u32(out, static_cast<std::uint32_t>(row.size()));
    for (std::uint32_t idx : row) put_u32(out, idx);
  }
  if (!out) throw IoError("failed writing dataset bundle: " + path);
}

InteractionMatrix read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset bundle: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("not a dataset bundle (bad magic): " + path);
  const std::uint16_t version = get_u16(in);
  if (version != kVersion)
    throw FormatError("unsupported dataset bundle version " + std::to_string(version));

  InteractionMatrix matrix;
  const std::uint32_t n_users = get_u32(in);
  const std::uint32_t n_items = get_u32(in);
  matrix.user_ids.reserve(n_users);
  matrix.item_ids.reserve(n_items);
  for (std::uint32_t u = 0; u < n_users; ++u) matrix.user_ids.push_back(get_string(in));
  for (std::uint32_t i = 0; i < n_items; ++i) matrix.item_ids.push_back(get_string(in));
  matrix.rows.resize(n_users);
  for (std::uint32_t u = 0; u < n_users; ++u) {
    const std::uint32_t len = get_u32(in);
    auto& row = matrix.rows[u];
    row.resize(len);
    for (std::uint32_t k = 0; k < len; ++k) {
      row[k] = get_u32(in);
      if (row[k] >= n_items) throw FormatError("item index out of range in dataset bundle");
    }
  }
  return matrix;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << "seed = " << m.seed << "\n"
      << "rating_threshold = " << m.rating_threshold << "\n"
      << "min_user_interactions = " << m.min_user_interactions << "\n"
      << "min_item_interactions = " << m.min_item_interactions << "\n"
      << "users = " << m.users << "\n"
      << "items = " << m.items << "\n"
      << "interactions = " << m.interactions << "\n";
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  DatasetManifest m;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(value);
    try {
      if (key == "seed") m.seed = std::stoull(value);
      else if (key == "rating_threshold") m.rating_threshold = std::stod(value);
      else if (key == "min_user_interactions") m.min_user_interactions = std::stoull(value);
      else if (key == "min_item_interactions") m.min_item_interactions = std::stoull(value);
      else if (key == "users") m.users = std::stoull(value);
      else if (key == "items") m.items = std::stoull(value);
      else if (key == "interactions") m.interactions = std::stoull(value);
    } catch (const std::exception&) {
      throw FormatError("bad manifest value for '" + key + "': " + value);
    }
  }
  return m;
}

}  // namespace recvae
