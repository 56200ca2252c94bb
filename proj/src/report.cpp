#include "hetsim/report.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "hetsim/config.h"

namespace hetsim {

uint64_t fnv1a64(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string csv_header() {
  return "scenario,phase,cycles,dram_bytes,utilization,latency_ms,"
         "throughput_tokens_per_s,prune_ratio_mean,bw_ratio,manifest_hash\n";
}

namespace {

void check_field(const std::string& s) {
  if (s.find_first_of(",\"\n") != std::string::npos)
    throw std::invalid_argument("csv field may not contain comma, quote, or newline: " + s);
}

}  // namespace

std::string csv_line(const ReportRow& row) {
  check_field(row.scenario);
  check_field(row.phase);
  check_field(row.bw_ratio);
  check_field(row.manifest_hash);
  std::string out;
  out += row.scenario;
  out += ',';
  out += row.phase;
  out += ',';
  out += format_real(row.cycles);
  out += ',';
  out += std::to_string(row.dram_bytes);
  out += ',';
  out += format_real(row.utilization);
  out += ',';
  out += format_real(row.latency_ms);
  out += ',';
  out += format_real(row.throughput_tokens_per_s);
  out += ',';
  out += format_real(row.prune_ratio_mean);
  out += ',';
  out += row.bw_ratio;
  out += ',';
  out += row.manifest_hash;
  out += '\n';
  return out;
}

std::string csv_table(const std::vector<ReportRow>& rows) {
  std::string out = csv_header();
  for (const ReportRow& r : rows) out += csv_line(r);
  return out;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace hetsim
