#include "lsno/serialize.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lsno {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int b = 0; b < 8; ++b) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
  static const std::array<std::uint32_t, 256> table = make_crc_table();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

namespace {

std::string fnv_hex(std::uint64_t h) {
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << h;
  return os.str();
}

}  // namespace

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for digest: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return fnv_hex(h);
}

std::string text_digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fnv_hex(h);
}

namespace {

// All containers are little-endian; this code assumes a little-endian host
// (checked at startup of the writers).
void require_little_endian() {
  const std::uint16_t probe = 1;
  if (*reinterpret_cast<const std::uint8_t*>(&probe) != 1)
    throw IoError("big-endian hosts are not supported by the container writers");
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in, const char* field) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError(std::string("truncated file while reading ") + field);
  return v;
}

std::string take_string(std::istream& in, const char* field, std::uint32_t max_len = 1u << 20) {
  const auto len = take<std::uint32_t>(in, field);
  if (len > max_len) throw FormatError(std::string("implausible length for ") + field);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw FormatError(std::string("truncated file while reading ") + field);
  return s;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  require_little_endian();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  out.write("LSNO", 4);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.count()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.grid.nx));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.grid.nt));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.grid.channels));
  put_string(out, ds.meta.generator);
  put<std::uint64_t>(out, ds.meta.seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.meta.params.size()));
  for (double p : ds.meta.params) put<double>(out, p);

  std::uint32_t crc = 0;
  for (const Sample& s : ds.samples) {
    if (!(s.target.grid == ds.grid)) throw DimensionError("save_dataset: sample grid mismatch");
    const auto bytes = static_cast<std::size_t>(s.target.values.size()) * sizeof(double);
    out.write(reinterpret_cast<const char*>(s.target.values.data()),
              static_cast<std::streamsize>(bytes));
    crc = crc32(s.target.values.data(), bytes, crc);
  }
  put<std::uint32_t>(out, crc);
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LSNO", 4) != 0) throw FormatError("bad magic (expected LSNO)");
  const auto version = take<std::uint16_t>(in, "version");
  if (version != 1) throw FormatError("unsupported LSNO version " + std::to_string(version));

  const auto count = take<std::uint32_t>(in, "count");
  const auto nx = take<std::uint32_t>(in, "spatial nodes");
  const auto nt = take<std::uint32_t>(in, "time nodes");
  const auto channels = take<std::uint32_t>(in, "channels");
  if (nx == 0 || nt == 0 || channels == 0) throw FormatError("zero grid extent in header");

  Dataset ds;
  ds.meta.generator = take_string(in, "generator name");
  ds.meta.seed = take<std::uint64_t>(in, "seed");
  const auto nparams = take<std::uint32_t>(in, "param count");
  ds.meta.params.resize(nparams);
  for (auto& p : ds.meta.params) p = take<double>(in, "params");

  ds.grid.dim = nx > 1 ? 2 : 1;
  ds.grid.nx = static_cast<int>(nx);
  ds.grid.nt = static_cast<int>(nt);
  ds.grid.channels = static_cast<int>(channels);
  if (ds.meta.params.size() >= 4) {
    ds.grid.x0 = ds.meta.params[0];
    ds.grid.x1 = ds.meta.params[1];
    ds.grid.t0 = ds.meta.params[2];
    ds.grid.t1 = ds.meta.params[3];
  } else {
    ds.grid.x0 = 0.0;
    ds.grid.x1 = ds.grid.dim == 2 ? 1.0 : 0.0;
    ds.grid.t0 = 0.0;
    ds.grid.t1 = 1.0;
  }

  const std::int64_t per_sample = ds.grid.value_count();
  std::uint32_t crc = 0;
  ds.samples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Eigen::ArrayXd values(per_sample);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(per_sample * sizeof(double)));
    if (!in) throw FormatError("truncated file while reading payload");
    crc = crc32(values.data(), static_cast<std::size_t>(per_sample) * sizeof(double), crc);
    ds.samples.push_back(make_sample(GridFunction(ds.grid, std::move(values))));
  }
  const auto stored_crc = take<std::uint32_t>(in, "checksum");
  if (stored_crc != crc) throw FormatError("payload checksum mismatch");
  return ds;
}

namespace {

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open descriptor: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

Dataset import_external(const std::string& path, const std::string& descriptor_path) {
  const auto kv = parse_kv_file(descriptor_path);
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw IngestionError("descriptor missing key: " + key);
    return it->second;
  };

  const std::vector<std::string> shape_s = split_csv(need("shape"));
  const std::vector<std::string> order = split_csv(need("order"));
  if (shape_s.size() != order.size() || shape_s.empty())
    throw IngestionError("descriptor shape and order must align");

  const std::string dtype = need("dtype");
  if (dtype != "f64" && dtype != "f32") throw IngestionError("dtype must be f64 or f32");
  const std::string endian = need("endian");
  if (endian != "little" && endian != "big") throw IngestionError("endian must be little or big");

  // Extents per logical axis {count, space, time, channel}.
  std::int64_t ext[4] = {1, 1, 1, 1};
  int axis_of[4] = {-1, -1, -1, -1};  // position in the file layout
  const char* names[4] = {"count", "space", "time", "channel"};
  for (std::size_t i = 0; i < order.size(); ++i) {
    int which = -1;
    for (int a = 0; a < 4; ++a)
      if (order[i] == names[a]) which = a;
    if (which < 0) throw IngestionError("unknown axis name: " + order[i]);
    if (axis_of[which] >= 0) throw IngestionError("axis listed twice: " + order[i]);
    axis_of[which] = static_cast<int>(i);
    ext[which] = std::stoll(shape_s[i]);
    if (ext[which] <= 0) throw IngestionError("nonpositive extent for axis " + order[i]);
  }

  const std::int64_t total = ext[0] * ext[1] * ext[2] * ext[3];
  const std::size_t elem = dtype == "f64" ? 8 : 4;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open raw file: " + path);
  in.seekg(0, std::ios::end);
  const std::int64_t file_bytes = in.tellg();
  in.seekg(0);
  if (file_bytes != total * static_cast<std::int64_t>(elem))
    throw IngestionError("raw file size " + std::to_string(file_bytes) +
                         " does not match descriptor (" + std::to_string(total * elem) + ")");

  std::vector<unsigned char> raw(static_cast<std::size_t>(file_bytes));
  in.read(reinterpret_cast<char*>(raw.data()), file_bytes);
  if (!in) throw IngestionError("raw file read failed");

  const bool swap = (endian == "big");
  auto value_at = [&](std::int64_t flat) -> double {
    unsigned char tmp[8];
    std::memcpy(tmp, raw.data() + static_cast<std::size_t>(flat) * elem, elem);
    if (swap)
      for (std::size_t i = 0; i < elem / 2; ++i) std::swap(tmp[i], tmp[elem - 1 - i]);
    if (elem == 8) {
      double v;
      std::memcpy(&v, tmp, 8);
      return v;
    }
    float v;
    std::memcpy(&v, tmp, 4);
    return static_cast<double>(v);
  };

  // Strides of the file layout, row-major over the declared order.
  std::int64_t stride[4] = {0, 0, 0, 0};
  {
    std::int64_t extents_in_order[8];
    for (std::size_t i = 0; i < order.size(); ++i) extents_in_order[i] = std::stoll(shape_s[i]);
    for (int a = 0; a < 4; ++a) {
      if (axis_of[a] < 0) continue;
      std::int64_t s = 1;
      for (std::size_t i = axis_of[a] + 1; i < order.size(); ++i) s *= extents_in_order[i];
      stride[a] = s;
    }
  }

  Dataset ds;
  ds.grid.dim = ext[1] > 1 ? 2 : 1;
  ds.grid.nx = static_cast<int>(ext[1]);
  ds.grid.nt = static_cast<int>(ext[2]);
  ds.grid.channels = static_cast<int>(ext[3]);
  if (ds.grid.nt < 2) throw IngestionError("imported data needs a time axis with >= 2 nodes");
  auto opt = [&](const char* key, double fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stod(it->second);
  };
  ds.grid.x0 = opt("x0", 0.0);
  ds.grid.x1 = opt("x1", ds.grid.dim == 2 ? 1.0 : 0.0);
  ds.grid.t0 = opt("t0", 0.0);
  ds.grid.t1 = opt("t1", 1.0);
  ds.meta.generator = "imported";
  ds.meta.seed = 0;
  ds.meta.params = {ds.grid.x0, ds.grid.x1, ds.grid.t0, ds.grid.t1};

  ds.samples.reserve(static_cast<std::size_t>(ext[0]));
  for (std::int64_t n = 0; n < ext[0]; ++n) {
    GridFunction f = GridFunction::zeros(ds.grid);
    for (std::int64_t ix = 0; ix < ext[1]; ++ix)
      for (std::int64_t it = 0; it < ext[2]; ++it)
        for (std::int64_t c = 0; c < ext[3]; ++c) {
          const std::int64_t flat =
              n * stride[0] + ix * stride[1] + it * stride[2] + c * stride[3];
          f.at(static_cast<int>(ix), static_cast<int>(it), static_cast<int>(c)) = value_at(flat);
        }
    ds.samples.push_back(make_sample(std::move(f)));
  }
  return ds;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  require_little_endian();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  out.write("LSCK", 4);
  put<std::uint16_t>(out, 1);
  put_string(out, ck.config_text);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.blocks.size()));

  std::uint32_t crc = 0;
  for (const auto& [name, tensor] : ck.blocks) {
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (Index d : tensor.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    const auto bytes = static_cast<std::size_t>(tensor.size()) * sizeof(double);
    out.write(reinterpret_cast<const char*>(tensor.values().data()),
              static_cast<std::streamsize>(bytes));
    crc = crc32(tensor.values().data(), bytes, crc);
  }
  put<std::uint32_t>(out, crc);
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LSCK", 4) != 0) throw FormatError("bad magic (expected LSCK)");
  const auto version = take<std::uint16_t>(in, "version");
  if (version != 1) throw FormatError("unsupported LSCK version " + std::to_string(version));

  Checkpoint ck;
  ck.config_text = take_string(in, "config text", 1u << 24);
  const auto nblocks = take<std::uint32_t>(in, "block count");
  std::uint32_t crc = 0;
  for (std::uint32_t b = 0; b < nblocks; ++b) {
    const std::string name = take_string(in, "block name");
    const auto rank = take<std::uint32_t>(in, "block rank");
    if (rank > 8) throw FormatError("implausible block rank");
    Shape shape(rank);
    for (auto& d : shape) d = take<std::uint32_t>(in, "block dims");
    Eigen::ArrayXd values(shape_size(shape));
    const auto bytes = static_cast<std::size_t>(values.size()) * sizeof(double);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw FormatError("truncated file while reading block data");
    crc = crc32(values.data(), bytes, crc);
    ck.blocks.emplace_back(name, Tensor::from_array(std::move(shape), std::move(values)));
  }
  const auto stored_crc = take<std::uint32_t>(in, "checksum");
  if (stored_crc != crc) throw FormatError("block data checksum mismatch");
  return ck;
}

}  // namespace lsno
