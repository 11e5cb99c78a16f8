#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gcpn/harness/train.hpp"

namespace gcpn::harness {

/// Sample mean and std (n-1); std is NaN for fewer than two finite values.
struct MeanStd {
  double mean = kNaN, std = kNaN;
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  double s = 0.0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    s += x;
    ++m.n;
  }
  if (m.n == 0) return m;
  m.mean = s / static_cast<double>(m.n);
  if (m.n < 2) return m;
  double ss = 0.0;
  for (double x : v) {
    if (!std::isnan(x)) ss += (x - m.mean) * (x - m.mean);
  }
  m.std = std::sqrt(ss / static_cast<double>(m.n - 1));
  return m;
}

struct GroupKey {
  std::string env, reward_mode;
  int learner = 0;
  bool operator<(const GroupKey& o) const {
    return std::tie(env, reward_mode, learner) < std::tie(o.env, o.reward_mode, o.learner);
  }
};

struct GroupStats {
  std::vector<std::uint64_t> seeds;
  MeanStd score, catch_rate, spread, cost, par;
  double norm_score = kNaN, norm_spread = kNaN;
  bool norm_flagged = false;
};

struct Report {
  std::map<GroupKey, GroupStats> groups;
  std::vector<std::string> gaps;  // run directories without readable results
};

inline Report build_report(const std::vector<fs::path>& runs) {
  Report rep;
  std::map<GroupKey, std::vector<RunSummary>> by;
  for (const auto& dir : runs) {
    try {
      const RunSummary s = read_summary(dir);
      by[{s.env_kind, s.reward_mode, static_cast<int>(algos::learner_kind_from_string(s.learner))}].push_back(s);
    } catch (const std::exception& e) {
      rep.gaps.push_back(dir.string() + ": " + e.what());
    }
  }
  auto column = [](const std::vector<RunSummary>& v, double RunSummary::*f) {
    std::vector<double> out;
    for (const auto& s : v) out.push_back(s.*f);
    return out;
  };
  for (auto& [key, v] : by) {
    std::sort(v.begin(), v.end(), [](const RunSummary& a, const RunSummary& b) { return a.seed < b.seed; });
    GroupStats g;
    for (const auto& s : v) g.seeds.push_back(s.seed);
    g.score = mean_std(column(v, &RunSummary::score));
    g.catch_rate = mean_std(column(v, &RunSummary::catch_rate));
    g.spread = mean_std(column(v, &RunSummary::critic_spread));
    g.cost = mean_std(column(v, &RunSummary::cost));
    g.par = mean_std(column(v, &RunSummary::par));
    rep.groups[key] = g;
  }
  const int maddpg = static_cast<int>(algos::LearnerKind::maddpg);
  for (auto& [key, g] : rep.groups) {
    const auto base = by.find({key.env, key.reward_mode, maddpg});
    if (base == by.end()) {
      g.norm_flagged = true;
      continue;
    }
    const Normalized ns = normalize({g.score.mean}, column(base->second, &RunSummary::score));
    const Normalized nsp = normalize({g.spread.mean}, column(base->second, &RunSummary::critic_spread));
    g.norm_flagged = ns.flagged;
    g.norm_score = ns.flagged ? kNaN : ns.values[0];
    g.norm_spread = nsp.flagged ? kNaN : nsp.values[0];
  }
  return rep;
}

inline std::string summary_tsv(const Report& rep) {
  std::ostringstream os;
  os << "env\treward_mode\tlearner\tseeds\tscore_mean\tscore_std\tscore_vs_maddpg\tcatch_mean\tcatch_std"
        "\tspread_mean\tspread_std\tspread_vs_maddpg\tcost_mean\tcost_std\tpar_mean\tpar_std\n";
  for (const auto& [k, g] : rep.groups) {
    os << k.env << '\t' << k.reward_mode << '\t' << algos::to_string(static_cast<algos::LearnerKind>(k.learner))
       << '\t' << g.seeds.size() << '\t' << fmt(g.score.mean) << '\t' << fmt(g.score.std) << '\t'
       << (g.norm_flagged ? std::string("flagged") : fmt(g.norm_score)) << '\t' << fmt(g.catch_rate.mean) << '\t'
       << fmt(g.catch_rate.std) << '\t' << fmt(g.spread.mean) << '\t' << fmt(g.spread.std) << '\t'
       << fmt(g.norm_spread) << '\t' << fmt(g.cost.mean) << '\t' << fmt(g.cost.std) << '\t' << fmt(g.par.mean)
       << '\t' << fmt(g.par.std) << '\n';
  }
  return os.str();
}

/// Static bar chart with one bar (mean) and whisker (std) per group.
inline std::string bar_svg(const std::string& title, const std::vector<std::string>& labels,
                           const std::vector<MeanStd>& values) {
  const int w = 120 + 90 * static_cast<int>(labels.size()), h = 320, base = 260, top = 40;
  double hi = 0.0, lo = 0.0;
  for (const auto& v : values) {
    if (std::isnan(v.mean)) continue;
    const double s = std::isnan(v.std) ? 0.0 : v.std;
    hi = std::max(hi, v.mean + s);
    lo = std::min(lo, v.mean - s);
  }
  if (hi == lo) hi = lo + 1.0;
  auto y = [&](double v) { return top + (hi - v) / (hi - lo) * (base - top); };
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  os << "<line x1=\"60\" x2=\"" << w - 20 << "\" y1=\"" << y(0.0) << "\" y2=\"" << y(0.0)
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"4\" y=\"" << y(hi) + 4 << "\" font-size=\"10\">" << fmt(hi) << "</text>\n";
  os << "<text x=\"4\" y=\"" << y(lo) + 4 << "\" font-size=\"10\">" << fmt(lo) << "</text>\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double x = 80 + 90 * static_cast<double>(i);
    os << "<text x=\"" << x << "\" y=\"" << base + 30 << "\" font-size=\"9\">" << labels[i] << "</text>\n";
    const MeanStd& v = values[i];
    if (std::isnan(v.mean)) {
      os << "<text x=\"" << x << "\" y=\"" << y(0.0) - 4 << "\" font-size=\"10\">n/a</text>\n";
      continue;
    }
    const double y0 = std::min(y(0.0), y(v.mean)), y1 = std::max(y(0.0), y(v.mean));
    os << "<rect x=\"" << x << "\" y=\"" << y0 << "\" width=\"60\" height=\"" << y1 - y0
       << "\" fill=\"#4a7ab5\"/>\n";
    if (!std::isnan(v.std)) {
      os << "<line x1=\"" << x + 30 << "\" x2=\"" << x + 30 << "\" y1=\"" << y(v.mean + v.std) << "\" y2=\""
         << y(v.mean - v.std) << "\" stroke=\"black\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

/// summary.tsv, gaps.txt and one SVG per metric that has data. Byte-stable
/// for identical inputs.
inline Report emit_report(const std::vector<fs::path>& runs, const fs::path& out) {
  const Report rep = build_report(runs);
  if (rep.groups.empty()) throw ConfigError("report: no completed runs among the given directories");
  fs::create_directories(out);
  write_text(out / "summary.tsv", summary_tsv(rep));
  std::string gaps;
  for (const auto& g : rep.gaps) gaps += g + "\n";
  write_text(out / "gaps.txt", gaps.empty() ? "none\n" : gaps);
  std::vector<std::string> labels;
  for (const auto& [k, g] : rep.groups) {
    labels.push_back(k.env.substr(0, 5) + "/" + k.reward_mode.substr(0, 3) + "/" +
                     algos::to_string(static_cast<algos::LearnerKind>(k.learner)));
  }
  const std::vector<std::pair<std::string, MeanStd GroupStats::*>> charts = {
      {"score", &GroupStats::score},          {"catch_rate", &GroupStats::catch_rate},
      {"critic_spread", &GroupStats::spread}, {"cost", &GroupStats::cost},
      {"par", &GroupStats::par}};
  for (const auto& [name, field] : charts) {
    std::vector<MeanStd> vals;
    bool any = false;
    for (const auto& [k, g] : rep.groups) {
      vals.push_back(g.*field);
      any = any || !std::isnan((g.*field).mean);
    }
    if (any) write_text(out / (name + ".svg"), bar_svg(name, labels, vals));
  }
  return rep;
}

}  // namespace gcpn::harness
