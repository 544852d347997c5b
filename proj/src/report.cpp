#include "uc2/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "uc2/error.hpp"

namespace uc2 {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void KvReport::set(const std::string& key, const std::string& v) {
  for (auto& [k, existing] : entries_) {
    if (k == key) {
      existing = v;
      return;
    }
  }
  entries_.emplace_back(key, v);
}

void KvReport::set(const std::string& key, double v) { set(key, format_double(v)); }

void KvReport::set(const std::string& key, std::size_t v) { set(key, std::to_string(v)); }

const std::string* KvReport::find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

void KvReport::write(std::ostream& os) const {
  for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
}

std::string KvReport::str() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

void KvReport::save(const std::filesystem::path& path) const { save_text(path, str()); }

void add_usage(KvReport& report, const AssignmentHistogram& histogram) {
  report.set("K", histogram.k());
  report.set("tokens", histogram.total());
  report.set("utilization", utilization(histogram));
  if (histogram.total() > 0) {
    const double h = assignment_entropy(histogram);
    report.set("entropy_nats", h);
    report.set("entropy_bits", nats_to_bits(h));
  } else {
    report.set("entropy_nats", "undefined");
  }
}

void add_distortion(KvReport& report, const DistortionReport& d) {
  report.set("distortion", d.total);
  report.set("distortion_decomposed", d.decomposed_total());
  report.set("variance_bound", d.variance_bound);
  report.set("variance_bound_holds", d.bound_holds);
}

void write_cluster_table(std::ostream& os, const DistortionReport& d) {
  os << "cluster,count,q,mse,variance\n";
  for (std::size_t k = 0; k < d.per_cluster.size(); ++k) {
    const auto& c = d.per_cluster[k];
    os << k << ',' << c.count << ',' << format_double(c.q) << ',' << format_double(c.mse) << ','
       << format_double(c.variance) << '\n';
  }
}

void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace) {
  os << kTraceHeader << '\n';
  for (const auto& row : trace) {
    os << row.step << ',' << format_double(row.loss) << ','
       << (std::isnan(row.utilization) ? std::string() : format_double(row.utilization)) << ','
       << format_double(row.wall_ms) << '\n';
  }
}

void save_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace) {
  std::ostringstream os;
  write_trace_csv(os, trace);
  save_text(path, os.str());
}

void save_text(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) fail(ErrorCode::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    fail(ErrorCode::kIo, "rename to " + path.string() + " failed: " + ec.message());
  }
}

}  // namespace uc2
