#pragma once

#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>

#include "artl/endpointing.hpp"
#include "artl/toy/trainer.hpp"

namespace artl::io {

inline std::string fixed(double v, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << v;
  auto s = os.str();
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.000"
  return s;
}

/// Rounds to `decimals` places so JSON output prints like the CSV does.
inline double rounded(double v, int decimals = 3) {
  const double scale = std::pow(10.0, decimals);
  const double r = std::round(v * scale) / scale;
  return r == 0.0 ? 0.0 : r;
}

// Columns: b_r,token_error,avg_ed_s,avg_fd_s,matched_tokens,final_loss
inline void write_sweep_csv(std::ostream& os, std::span<const toy::SweepRow> rows) {
  os << "b_r,token_error,avg_ed_s,avg_fd_s,matched_tokens,final_loss\n";
  for (const auto& r : rows)
    os << (r.right ? std::to_string(*r.right) : std::string("inf")) << ',' << fixed(r.token_error, 4) << ','
       << fixed(r.avg_ed, 3) << ',' << fixed(r.avg_fd, 3) << ',' << r.matched_tokens << ',' << fixed(r.final_loss, 6)
       << '\n';
}

// Columns: utterances,decided,l_avg_s,l_p90_s,early_cut_pct,noep_pct,truncated_tokens
// Latency fields are empty when no utterance was decided.
inline void write_endpoint_csv(std::ostream& os, const EndpointReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fixed(*v, 3) : std::string(); };
  os << "utterances,decided,l_avg_s,l_p90_s,early_cut_pct,noep_pct,truncated_tokens\n"
     << r.utterances << ',' << r.decided << ',' << opt(r.l_avg) << ',' << opt(r.l_p90) << ','
     << fixed(r.early_cut_pct, 1) << ',' << fixed(r.noep_pct, 1) << ',' << r.truncated_tokens << '\n';
}

}  // namespace artl::io
