#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uc2/cascade_train.hpp"
#include "uc2/metrics.hpp"

namespace uc2 {

// Ordered key=value lines. Doubles use %.17g so they parse back exactly.
class KvReport {
 public:
  void set(const std::string& key, double v);
  void set(const std::string& key, std::size_t v);
  void set(const std::string& key, const std::string& v);
  void set(const std::string& key, const char* v) { set(key, std::string(v)); }
  void set(const std::string& key, bool v) { set(key, std::string(v ? "true" : "false")); }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }
  const std::string* find(const std::string& key) const;

  void write(std::ostream& os) const;
  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_double(double v);

// K, utilization, entropy_nats and distortion for a token histogram, plus
// the optional distortion breakdown.
void add_usage(KvReport& report, const AssignmentHistogram& histogram);
void add_distortion(KvReport& report, const DistortionReport& d);

// cluster,count,q,mse,variance rows.
void write_cluster_table(std::ostream& os, const DistortionReport& d);

inline constexpr const char* kTraceHeader = "step,loss,utilization,wall_ms";
void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace);
void save_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace);

// Writes text to a temp sibling and renames it into place.
void save_text(const std::filesystem::path& path, const std::string& text);

}  // namespace uc2
