// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Evaluation report: one CSV row of metrics per utterance plus a mean row.
#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "rcunet/common.hpp"

namespace rcunet {

struct EvalRow {
  std::string id;
  std::string noise_kind;
  double snr_db = 0.0;
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
  double stoi = 0.0;
};

inline constexpr const char* kEvalHeader = "id,noise_kind,snr_db,sdr,sir,sar,stoi";

inline EvalRow mean_row(const std::vector<EvalRow>& rows) {
  check(!rows.empty(), "eval report: no rows to aggregate");
  EvalRow m;
  m.id = "mean";
  m.noise_kind = "all";
  for (const auto& r : rows) {
    m.snr_db += r.snr_db;
    m.sdr += r.sdr;
    m.sir += r.sir;
    m.sar += r.sar;
    m.stoi += r.stoi;
  }
  const double n = static_cast<double>(rows.size());
  m.snr_db /= n;
  m.sdr /= n;
  m.sir /= n;
  m.sar /= n;
  m.stoi /= n;
  return m;
}

inline std::string eval_report_csv(const std::vector<EvalRow>& rows) {
  std::ostringstream os;
  os << kEvalHeader << '\n' << std::fixed << std::setprecision(4);
  auto emit = [&os](const EvalRow& r) {
    os << r.id << ',' << r.noise_kind << ',' << r.snr_db << ',' << r.sdr << ',' << r.sir << ','
       << r.sar << ',' << r.stoi << '\n';
  };
  for (const auto& r : rows) emit(r);
  emit(mean_row(rows));
  return os.str();
}

inline void write_eval_report(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  check(out.good(), "eval report: cannot open '", path, "' for writing");
  out << eval_report_csv(rows);
  check(out.good(), "eval report: write to '", path, "' failed");
}

}  // namespace rcunet
