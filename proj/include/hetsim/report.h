#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hetsim {

// FNV-1a 64-bit over raw bytes; stable across platforms.
uint64_t fnv1a64(std::string_view data);
std::string hash_hex(uint64_t h);

// One line of the results table.  Every emitted CSV uses this single schema;
// fields that do not apply to a row stay zero / empty.
struct ReportRow {
  std::string scenario;
  std::string phase;  // encode | prefill | decode | total | <variant>-<phase> | l=<n>
  double cycles = 0;
  uint64_t dram_bytes = 0;
  double utilization = 0;
  double latency_ms = 0;
  double throughput_tokens_per_s = 0;
  double prune_ratio_mean = 0;
  std::string bw_ratio;  // "c:m"
  std::string manifest_hash;
};

std::string csv_header();
std::string csv_line(const ReportRow& row);
std::string csv_table(const std::vector<ReportRow>& rows);

// Writes via a temp file in the same directory plus rename, so readers never
// observe a half-written report.  Creates missing parent directories.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace hetsim
