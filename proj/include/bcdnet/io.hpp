#pragma once

#include <bit>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <utility>

#include "core.hpp"
#include "denoiser.hpp"
#include "geometry.hpp"
#include "mbir.hpp"
#include "pipeline.hpp"

namespace bcdnet {

// File errors are split by blame: OS-level trouble (missing, unreadable,
// truncated, unwritable) throws io_error, while structurally bad content
// (wrong magic, wrong version, inconsistent sizes) throws validation_error.

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  put_bytes(os, b, 4);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline void put_f64(std::ostream& os, double v) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  put_u32(os, static_cast<std::uint32_t>(u));
  put_u32(os, static_cast<std::uint32_t>(u >> 32));
}

inline std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw io_error(path + ": truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline float get_f32(std::istream& is, const std::string& path) {
  return std::bit_cast<float>(get_u32(is, path));
}

inline double get_f64(std::istream& is, const std::string& path) {
  const std::uint64_t lo = get_u32(is, path);
  const std::uint64_t hi = get_u32(is, path);
  return std::bit_cast<double>(lo | (hi << 32));
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  std::ofstream os(path, mode);
  if (!os) throw io_error(path + ": cannot open for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream is(path, mode);
  if (!is) throw io_error(path + ": cannot open for reading");
  return is;
}

inline void check_magic(std::istream& is, const std::string& path, const char expect[4],
                        const char* kind) {
  char magic[4];
  is.read(magic, 4);
  if (!is) throw io_error(path + ": truncated file");
  for (int i = 0; i < 4; ++i)
    if (magic[i] != expect[i])
      throw validation_error(path + ": not a " + kind + " file (bad magic)");
}

/// %.17g round-trips doubles exactly through text.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense arrays: magic "BCDN", version, ndim, dims, then float32 payload in
// row-major order, everything little-endian.

constexpr std::uint32_t kBcdnVersion = 1;

struct BcdnArray {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

inline void write_bcdn(const std::string& path, const BcdnArray& array) {
  std::size_t count = 1;
  require(!array.dims.empty(), "write_bcdn: need at least one dimension");
  for (std::uint32_t d : array.dims) {
    require(d >= 1, "write_bcdn: dimensions must be >= 1");
    count *= d;
  }
  require(count == array.data.size(), "write_bcdn: dims do not match payload size");
  std::ofstream os = detail::open_out(path, std::ios::binary);
  os.write("BCDN", 4);
  detail::put_u32(os, kBcdnVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(array.dims.size()));
  for (std::uint32_t d : array.dims) detail::put_u32(os, d);
  for (float v : array.data) detail::put_f32(os, v);
  os.flush();
  if (!os) throw io_error(path + ": write failed");
}

inline BcdnArray read_bcdn(const std::string& path) {
  std::ifstream is = detail::open_in(path, std::ios::binary);
  detail::check_magic(is, path, "BCDN", "BCDN array");
  const std::uint32_t version = detail::get_u32(is, path);
  if (version != kBcdnVersion)
    throw validation_error(path + ": unsupported BCDN version " + std::to_string(version));
  const std::uint32_t ndim = detail::get_u32(is, path);
  if (ndim < 1 || ndim > 8) throw validation_error(path + ": implausible dimension count");
  BcdnArray array;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint32_t d = detail::get_u32(is, path);
    if (d < 1) throw validation_error(path + ": zero-sized dimension");
    array.dims.push_back(d);
    count *= d;
  }
  array.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) array.data[i] = detail::get_f32(is, path);
  return array;
}

inline void save_image(const std::string& path, const Image& img) {
  require(img.width >= 1 && img.height >= 1, "save_image: empty image");
  BcdnArray array;
  array.dims = {static_cast<std::uint32_t>(img.height), static_cast<std::uint32_t>(img.width)};
  array.data.assign(img.values.begin(), img.values.end());
  write_bcdn(path, array);
}

inline Image load_image(const std::string& path, double pixel_size = 1.0) {
  const BcdnArray array = read_bcdn(path);
  if (array.dims.size() != 2) throw validation_error(path + ": expected a 2-D image");
  Image img(static_cast<int>(array.dims[1]), static_cast<int>(array.dims[0]), pixel_size);
  for (std::size_t i = 0; i < array.data.size(); ++i) img.values[i] = array.data[i];
  return img;
}

template <typename Tag>
void save_ray_grid(const std::string& path, const RayGrid<Tag>& grid) {
  require(grid.n_detectors >= 1 && grid.n_views >= 1, "save_ray_grid: empty grid");
  BcdnArray array;
  array.dims = {static_cast<std::uint32_t>(grid.n_views),
                static_cast<std::uint32_t>(grid.n_detectors)};
  array.data.assign(grid.values.begin(), grid.values.end());
  write_bcdn(path, array);
}

template <typename Tag>
RayGrid<Tag> load_ray_grid(const std::string& path) {
  const BcdnArray array = read_bcdn(path);
  if (array.dims.size() != 2) throw validation_error(path + ": expected a 2-D ray grid");
  RayGrid<Tag> grid(static_cast<int>(array.dims[1]), static_cast<int>(array.dims[0]));
  for (std::size_t i = 0; i < array.data.size(); ++i) grid.values[i] = array.data[i];
  return grid;
}

inline void save_sinogram(const std::string& path, const Sinogram& s) { save_ray_grid(path, s); }
inline Sinogram load_sinogram(const std::string& path) { return load_ray_grid<SinogramTag>(path); }

// ---------------------------------------------------------------------------
// Key = value text files. '#' starts a comment; keys may repeat (each
// occurrence is kept in file order).

struct KeyValues {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string source = "<memory>";

  bool has(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return true;
    return false;
  }

  const std::string& get(const std::string& key) const {
    const std::string* last = nullptr;
    for (const auto& [k, v] : entries)
      if (k == key) last = &v;
    if (!last) throw validation_error(source + ": missing required key '" + key + "'");
    return *last;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }

  std::vector<std::string> all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries)
      if (k == key) out.push_back(v);
    return out;
  }

  double get_double(const std::string& key) const { return parse_double(key, get(key)); }
  double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }
  long get_int(const std::string& key) const { return parse_int(key, get(key)); }
  long get_int_or(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }
  bool get_bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw validation_error(source + ": key '" + key + "' is not a boolean: " + v);
  }
  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    std::string buf;
    for (char c : get(key) + ",") {
      if (c == ',') {
        if (!buf.empty()) out.push_back(parse_double(key, buf));
        buf.clear();
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        buf += c;
      }
    }
    return out;
  }

  double parse_double(const std::string& key, const std::string& text) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw validation_error(source + ": key '" + key + "' is not a number: " + text);
    }
  }
  long parse_int(const std::string& key, const std::string& text) const {
    try {
      std::size_t used = 0;
      const long v = std::stol(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw validation_error(source + ": key '" + key + "' is not an integer: " + text);
    }
  }
};

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline KeyValues parse_key_values(std::istream& is, const std::string& source) {
  KeyValues kv;
  kv.source = source;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw validation_error(source + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty())
      throw validation_error(source + ":" + std::to_string(line_no) + ": empty key");
    kv.entries.emplace_back(key, value);
  }
  return kv;
}

inline KeyValues load_key_values(const std::string& path) {
  std::ifstream is = detail::open_in(path, std::ios::in);
  return parse_key_values(is, path);
}

// ---------------------------------------------------------------------------
// Geometry sidecar (text, units in the key names).

inline void save_geometry(const std::string& path, const Geometry& g) {
  validate(g);
  std::ofstream os = detail::open_out(path, std::ios::out);
  os << "image_width = " << g.image_width << "\n";
  os << "image_height = " << g.image_height << "\n";
  os << "pixel_size_mm = " << detail::fmt(g.pixel_size) << "\n";
  os << "n_detectors = " << g.n_detectors << "\n";
  os << "detector_spacing_mm = " << detail::fmt(g.detector_spacing) << "\n";
  os << "n_views = " << g.n_views << "\n";
  os << "angles_deg = ";
  for (int v = 0; v < g.n_views; ++v) {
    if (v) os << ",";
    os << detail::fmt(g.angles[v] * 180.0 / std::numbers::pi);
  }
  os << "\n";
  os.flush();
  if (!os) throw io_error(path + ": write failed");
}

inline Geometry load_geometry(const std::string& path) {
  const KeyValues kv = load_key_values(path);
  Geometry g;
  g.image_width = static_cast<int>(kv.get_int("image_width"));
  g.image_height = static_cast<int>(kv.get_int("image_height"));
  g.pixel_size = kv.get_double("pixel_size_mm");
  g.n_detectors = static_cast<int>(kv.get_int("n_detectors"));
  g.detector_spacing = kv.get_double("detector_spacing_mm");
  g.n_views = static_cast<int>(kv.get_int("n_views"));
  for (double deg : kv.get_double_list("angles_deg"))
    g.angles.push_back(deg * std::numbers::pi / 180.0);
  validate(g);
  return g;
}

// ---------------------------------------------------------------------------
// Phantom specs (text).

inline void save_phantom_spec(const std::string& path, const PhantomSpec& spec) {
  validate(spec);
  std::ofstream os = detail::open_out(path, std::ios::out);
  os << "grid.width = " << spec.width << "\n";
  os << "grid.height = " << spec.height << "\n";
  os << "grid.pixel_size_mm = " << detail::fmt(spec.pixel_size) << "\n";
  for (const Ellipse& e : spec.ellipses) {
    os << "ellipse = " << detail::fmt(e.cx_mm) << " " << detail::fmt(e.cy_mm) << " "
       << detail::fmt(e.semi_a_mm) << " " << detail::fmt(e.semi_b_mm) << " "
       << detail::fmt(e.rotation_deg) << " " << detail::fmt(e.delta_mu) << "\n";
  }
  os.flush();
  if (!os) throw io_error(path + ": write failed");
}

inline PhantomSpec load_phantom_spec(const std::string& path) {
  const KeyValues kv = load_key_values(path);
  PhantomSpec spec;
  spec.width = static_cast<int>(kv.get_int("grid.width"));
  spec.height = static_cast<int>(kv.get_int("grid.height"));
  spec.pixel_size = kv.get_double("grid.pixel_size_mm");
  for (const std::string& entry : kv.all("ellipse")) {
    std::istringstream fields(entry);
    Ellipse e;
    if (!(fields >> e.cx_mm >> e.cy_mm >> e.semi_a_mm >> e.semi_b_mm >> e.rotation_deg >>
          e.delta_mu))
      throw validation_error(path + ": ellipse needs six numeric fields: " + entry);
    std::string extra;
    if (fields >> extra)
      throw validation_error(path + ": ellipse has trailing fields: " + entry);
    spec.ellipses.push_back(e);
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// Trained models: magic "BCDM", version, layer count, filter count, taps,
// beta, then per layer the decode filters, encode filters, and log
// thresholds as float64. Version 1 carries one filter shape for the whole
// network; loading refuses mismatched layers unless explicitly allowed (a
// future heterogeneous version would set the flag).

constexpr std::uint32_t kBcdmVersion = 1;

inline void save_model(const std::string& path, const BcdNetModel& model) {
  validate(model);
  const AutoencoderParams& first = model.layers.front();
  for (const AutoencoderParams& p : model.layers)
    require(p.filter_count == first.filter_count && p.filter_side == first.filter_side,
            "save_model: layers disagree on filter shape");
  std::ofstream os = detail::open_out(path, std::ios::binary);
  os.write("BCDM", 4);
  detail::put_u32(os, kBcdmVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(model.layers.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(first.filter_count));
  detail::put_u32(os, static_cast<std::uint32_t>(first.taps()));
  detail::put_f64(os, model.beta);
  for (const AutoencoderParams& p : model.layers) {
    for (double v : p.decode) detail::put_f64(os, v);
    for (double v : p.encode) detail::put_f64(os, v);
    for (double v : p.log_thresholds) detail::put_f64(os, v);
  }
  os.flush();
  if (!os) throw io_error(path + ": write failed");
}

inline BcdNetModel load_model(const std::string& path, bool allow_heterogeneous = false) {
  std::ifstream is = detail::open_in(path, std::ios::binary);
  detail::check_magic(is, path, "BCDM", "model");
  const std::uint32_t version = detail::get_u32(is, path);
  if (version != kBcdmVersion)
    throw validation_error(path + ": unsupported model version " + std::to_string(version));
  const std::uint32_t n_layers = detail::get_u32(is, path);
  const std::uint32_t filter_count = detail::get_u32(is, path);
  const std::uint32_t taps = detail::get_u32(is, path);
  if (n_layers < 1) throw validation_error(path + ": model has no layers");
  const int side = static_cast<int>(std::lround(std::sqrt(double(taps))));
  if (side * side != static_cast<int>(taps) || side % 2 == 0)
    throw validation_error(path + ": taps is not an odd square");

  BcdNetModel model;
  model.beta = detail::get_f64(is, path);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    AutoencoderParams p;
    p.filter_count = static_cast<int>(filter_count);
    p.filter_side = side;
    p.decode.resize(static_cast<std::size_t>(filter_count) * taps);
    p.encode.resize(p.decode.size());
    p.log_thresholds.resize(filter_count);
    for (double& v : p.decode) v = detail::get_f64(is, path);
    for (double& v : p.encode) v = detail::get_f64(is, path);
    for (double& v : p.log_thresholds) v = detail::get_f64(is, path);
    if (!allow_heterogeneous && !model.layers.empty()) {
      const AutoencoderParams& first = model.layers.front();
      if (p.filter_count != first.filter_count || p.filter_side != first.filter_side)
        throw validation_error(path + ": layers disagree on filter shape");
    }
    model.layers.push_back(std::move(p));
  }
  validate(model);
  return model;
}

// ---------------------------------------------------------------------------
// Trace and metric CSVs.

inline void write_solver_trace_csv(const std::string& path, const SolveTrace& trace) {
  std::ofstream os = detail::open_out(path, std::ios::out);
  os << "iteration,objective,step_norm\n";
  for (std::size_t j = 0; j < trace.objectives.size(); ++j)
    os << (j + 1) << "," << detail::fmt(trace.objectives[j]) << ","
       << detail::fmt(trace.step_norms[j]) << "\n";
  os.flush();
  if (!os) throw io_error(path + ": write failed");
}

/// zero_seconds trades the timing column for byte-reproducible output.
inline void write_layer_trace_csv(const std::string& path, const LayerTrace& trace,
                                  bool zero_seconds = false) {
  std::ofstream os = detail::open_out(path, std::ios::out);
  os << "layer,rmse_hu,objective,step_norm,epsilon_hat,seconds,projector_calls\n";
  for (const LayerRecord& r : trace.rows) {
    os << r.layer << "," << detail::fmt(r.rmse_hu) << "," << detail::fmt(r.objective) << ","
       << detail::fmt(r.step_norm) << "," << detail::fmt(r.epsilon_hat) << ","
       << detail::fmt(zero_seconds ? 0.0 : r.seconds) << "," << r.projector_calls << "\n";
  }
  os.flush();
  if (!os) throw io_error(path + ": write failed");
}

inline void append_metrics_csv(const std::string& path, const std::string& label,
                               double rmse_value) {
  const bool fresh = !std::ifstream(path).good();
  std::ofstream os(path, std::ios::app);
  if (!os) throw io_error(path + ": cannot open for appending");
  if (fresh) os << "image,rmse_hu\n";
  os << label << "," << detail::fmt(rmse_value) << "\n";
  os.flush();
  if (!os) throw io_error(path + ": write failed");
}

}  // namespace bcdnet
