#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hetsim/pruning.h"

namespace hetsim {

namespace {

constexpr char binary_magic[4] = {'H', 'T', 'R', 'C'};
constexpr uint32_t format_version = 1;

void io_fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("trace file " + path + ": " + what);
}

void check_shape(const ActivationTrace& t, const std::string& path) {
  if (t.layers < 1 || t.d_model < 1 || t.d_ffn < 1 || t.tokens < 1)
    io_fail(path, "degenerate shape in header");
  uint64_t rows = uint64_t(t.tokens) * t.layers;
  if (rows > (uint64_t(1) << 28)) io_fail(path, "unreasonable row count");
}

void put_u32(std::ostream& os, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char(v >> 24)};
  os.write(b, 4);
}

uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) io_fail(path, "truncated header");
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

}  // namespace

void write_trace_text(const ActivationTrace& t, const std::string& path) {
  check_shape(t, path);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) io_fail(path, "cannot open for writing");
  os << "trace.version = " << format_version << "\n";
  os << "trace.model = " << (t.model_name.empty() ? "unnamed" : t.model_name) << "\n";
  os << "trace.layers = " << t.layers << "\n";
  os << "trace.d_model = " << t.d_model << "\n";
  os << "trace.d_ffn = " << t.d_ffn << "\n";
  os << "trace.tokens = " << t.tokens << "\n";
  for (int tok = 0; tok < t.tokens; tok++)
    for (int l = 0; l < t.layers; l++) {
      for (int which = 0; which < 2; which++) {
        const auto& v = which == 0 ? t.vx_at(tok, l) : t.vd_at(tok, l);
        os << (which == 0 ? "vx " : "vd ") << tok << " " << l;
        for (double x : v) os << " " << format_real(x);
        os << "\n";
      }
    }
  if (!os) io_fail(path, "write failed");
}

ActivationTrace read_trace_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_fail(path, "cannot open");
  ActivationTrace t;
  std::string line;
  size_t lineno = 0;
  bool header_done = false;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "vx" || tag == "vd") {
      if (!header_done) {
        check_shape(t, path);
        t.vx.assign(size_t(t.tokens) * t.layers, {});
        t.vd.assign(size_t(t.tokens) * t.layers, {});
        header_done = true;
      }
      int tok, l;
      if (!(ss >> tok >> l) || tok < 0 || tok >= t.tokens || l < 0 || l >= t.layers)
        io_fail(path, "bad row coordinates at line " + std::to_string(lineno));
      int want = tag == "vx" ? t.d_model : t.d_ffn;
      std::vector<double> v;
      v.reserve(want);
      double x;
      while (ss >> x) v.push_back(x);
      if (int(v.size()) != want)
        io_fail(path, "row width mismatch at line " + std::to_string(lineno));
      (tag == "vx" ? t.vx : t.vd)[t.index(tok, l)] = std::move(v);
    } else if (tag.rfind("trace.", 0) == 0) {
      std::string eq, value;
      ss >> eq >> value;
      if (eq != "=") io_fail(path, "bad header at line " + std::to_string(lineno));
      if (tag == "trace.version") {
        if (value != std::to_string(format_version)) io_fail(path, "unsupported version " + value);
      } else if (tag == "trace.model") t.model_name = value;
      else if (tag == "trace.layers") t.layers = std::stoi(value);
      else if (tag == "trace.d_model") t.d_model = std::stoi(value);
      else if (tag == "trace.d_ffn") t.d_ffn = std::stoi(value);
      else if (tag == "trace.tokens") t.tokens = std::stoi(value);
      else io_fail(path, "unknown header key " + tag);
    } else {
      io_fail(path, "unrecognized line " + std::to_string(lineno));
    }
  }
  if (!header_done) io_fail(path, "no data rows");
  for (size_t i = 0; i < t.vx.size(); i++)
    if (t.vx[i].empty() || t.vd[i].empty()) io_fail(path, "missing rows");
  return t;
}

void write_trace_binary(const ActivationTrace& t, const std::string& path) {
  check_shape(t, path);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) io_fail(path, "cannot open for writing");
  os.write(binary_magic, 4);
  put_u32(os, format_version);
  put_u32(os, uint32_t(t.layers));
  put_u32(os, uint32_t(t.d_model));
  put_u32(os, uint32_t(t.d_ffn));
  put_u32(os, uint32_t(t.tokens));
  put_u32(os, 1);  // flags: vd rows present
  put_u32(os, 0);  // reserved
  auto put_rows = [&](const std::vector<std::vector<double>>& rows) {
    for (const auto& v : rows)
      for (double x : v) {
        float f = float(x);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(os, bits);
      }
  };
  put_rows(t.vx);
  put_rows(t.vd);
  if (!os) io_fail(path, "write failed");
}

ActivationTrace read_trace_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_fail(path, "cannot open");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, binary_magic, 4) != 0)
    io_fail(path, "bad magic");
  if (get_u32(is, path) != format_version) io_fail(path, "unsupported version");
  ActivationTrace t;
  t.layers = int(get_u32(is, path));
  t.d_model = int(get_u32(is, path));
  t.d_ffn = int(get_u32(is, path));
  t.tokens = int(get_u32(is, path));
  uint32_t flags = get_u32(is, path);
  get_u32(is, path);  // reserved
  if ((flags & 1) == 0) io_fail(path, "traces without vd rows are not supported");
  check_shape(t, path);
  t.model_name = "";
  size_t rows = size_t(t.tokens) * t.layers;
  auto get_rows = [&](std::vector<std::vector<double>>& dst, int width) {
    dst.assign(rows, {});
    for (auto& v : dst) {
      v.resize(width);
      for (int c = 0; c < width; c++) {
        uint32_t bits = get_u32(is, path);
        float f;
        std::memcpy(&f, &bits, 4);
        v[c] = double(f);
      }
    }
  };
  get_rows(t.vx, t.d_model);
  get_rows(t.vd, t.d_ffn);
  return t;
}

ActivationTrace read_trace(const std::string& path) {
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".bin") == 0)
    return read_trace_binary(path);
  return read_trace_text(path);
}

}  // namespace hetsim
