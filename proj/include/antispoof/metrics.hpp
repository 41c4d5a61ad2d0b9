#pragma once

// Detection metrics: EER on the ROC convex hull, min-tDCF in its ASVspoof2019
// (legacy) or revised form, DET operating points with probit companions, and
// score-level average fusion. Scores are "higher = more bona fide"; a trial is
// accepted as bona fide when score >= threshold.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace antispoof {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScoreSet {
  // deterministic iteration order keeps outputs reproducible
  std::map<std::string, double> scores;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// ---------------------------------------------------------------------------
// probit (inverse standard normal CDF), Acklam's rational approximation with
// one Halley refinement; clamped away from 0/1 for plotting

inline double probit(double p) {
  const double plow = 1e-12;
  p = std::min(std::max(p, plow), 1.0 - plow);
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double pl = 0.02425;
  double x;
  if (p < pl) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - pl) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

// ---------------------------------------------------------------------------
// operating points

namespace detail {

inline void require_two_classes(const std::vector<double>& bona, const std::vector<double>& spoof,
                                const char* op) {
  if (bona.empty() || spoof.empty())
    throw MetricError(std::string(op) + ": need scores from both classes");
  for (double s : bona)
    if (!std::isfinite(s)) throw MetricError(std::string(op) + ": non-finite score");
  for (double s : spoof)
    if (!std::isfinite(s)) throw MetricError(std::string(op) + ": non-finite score");
}

}  // namespace detail

// One point per distinct threshold (each observed score plus +inf), swept from
// low to high. FAR falls, FRR rises.
inline std::vector<DetPoint> det_points(const std::vector<double>& bona,
                                        const std::vector<double>& spoof) {
  detail::require_two_classes(bona, spoof, "det_points");
  std::vector<double> thresholds;
  thresholds.reserve(bona.size() + spoof.size() + 1);
  thresholds.insert(thresholds.end(), bona.begin(), bona.end());
  thresholds.insert(thresholds.end(), spoof.begin(), spoof.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<double> sb = bona, ss = spoof;
  std::sort(sb.begin(), sb.end());
  std::sort(ss.begin(), ss.end());
  double nb = static_cast<double>(sb.size()), ns = static_cast<double>(ss.size());

  std::vector<DetPoint> out;
  out.reserve(thresholds.size() + 1);
  auto at = [&](double t) {
    // accepted iff score >= t
    std::size_t bona_rejected = std::lower_bound(sb.begin(), sb.end(), t) - sb.begin();
    std::size_t spoof_accepted = ss.end() - std::lower_bound(ss.begin(), ss.end(), t);
    return DetPoint{t, static_cast<double>(spoof_accepted) / ns,
                    static_cast<double>(bona_rejected) / nb};
  };
  for (double t : thresholds) out.push_back(at(t));
  double top = thresholds.back() + 1.0;
  out.push_back(DetPoint{top, 0.0, 1.0});
  return out;
}

// ---------------------------------------------------------------------------
// EER: lower convex hull of the (FAR, FRR) operating points, intersected with
// the diagonal. Ties break toward the lower threshold.

inline EerResult compute_eer(const std::vector<double>& bona, const std::vector<double>& spoof) {
  detail::require_two_classes(bona, spoof, "compute_eer");
  std::vector<DetPoint> pts = det_points(bona, spoof);
  // prepend the accept-all operating point
  pts.insert(pts.begin(), DetPoint{pts.front().threshold - 1.0, 1.0, 0.0});

  // lower hull in the (FAR, FRR) plane; pts already ordered by decreasing FAR
  // (increasing threshold). Keep it convex from the (1,0) end to the (0,1) end.
  std::vector<DetPoint> hull;
  for (const DetPoint& p : pts) {
    while (hull.size() >= 2) {
      const DetPoint& a = hull[hull.size() - 2];
      const DetPoint& b = hull[hull.size() - 1];
      double cross = (b.far - a.far) * (p.frr - a.frr) - (b.frr - a.frr) * (p.far - a.far);
      // remove b when it lies on or above segment a->p
      if (cross >= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(p);
  }

  for (std::size_t i = 0; i + 1 < hull.size(); ++i) {
    double d0 = hull[i].far - hull[i].frr;
    double d1 = hull[i + 1].far - hull[i + 1].frr;
    if (d0 >= 0.0 && d1 <= 0.0) {
      if (d0 == d1) return {hull[i].far, hull[i].threshold};
      double s = d0 / (d0 - d1);
      // land exactly on a hull vertex when the crossing sits there
      if (s <= 0.0) return {hull[i].far, hull[i].threshold};
      if (s >= 1.0) return {hull[i + 1].far, hull[i + 1].threshold};
      double eer = hull[i].far + s * (hull[i + 1].far - hull[i].far);
      double thr = hull[i].threshold + s * (hull[i + 1].threshold - hull[i].threshold);
      return {eer, thr};
    }
  }
  // fully one-sided curve (never happens with both endpoints present)
  throw MetricError("compute_eer: no diagonal crossing found");
}

// ---------------------------------------------------------------------------
// tandem detection cost function

enum class TdcfVersion { legacy2019, revised };

struct TdcfParams {
  double p_target = 0.9405;
  double p_nontarget = 0.0095;
  double p_spoof = 0.05;
  double c_miss_asv = 1.0;
  double c_fa_asv = 10.0;
  double c_miss_cm = 1.0;
  double c_fa_cm = 10.0;
  // ASV operating point error rates (from the organizer ASV scores)
  double p_miss_asv = 0.05;
  double p_fa_asv = 0.05;
  double p_miss_spoof_asv = 0.05;
  TdcfVersion version = TdcfVersion::legacy2019;

  void validate() const {
    if (!(p_target > 0 && p_nontarget > 0 && p_spoof > 0))
      throw MetricError("tdcf: priors must be positive");
    if (std::abs(p_target + p_nontarget + p_spoof - 1.0) > 1e-6)
      throw MetricError("tdcf: priors must sum to 1");
    if (!(c_miss_asv > 0 && c_fa_asv > 0 && c_miss_cm > 0 && c_fa_cm > 0))
      throw MetricError("tdcf: costs must be positive");
    for (double r : {p_miss_asv, p_fa_asv, p_miss_spoof_asv})
      if (r < 0 || r > 1) throw MetricError("tdcf: ASV rates must be in [0,1]");
  }

  nlohmann::json to_json() const {
    return {{"p_target", p_target},
            {"p_nontarget", p_nontarget},
            {"p_spoof", p_spoof},
            {"c_miss_asv", c_miss_asv},
            {"c_fa_asv", c_fa_asv},
            {"c_miss_cm", c_miss_cm},
            {"c_fa_cm", c_fa_cm},
            {"p_miss_asv", p_miss_asv},
            {"p_fa_asv", p_fa_asv},
            {"p_miss_spoof_asv", p_miss_spoof_asv},
            {"version", version == TdcfVersion::legacy2019 ? "legacy2019" : "revised"}};
  }

  static TdcfParams from_json(const nlohmann::json& j) {
    TdcfParams p;
    p.p_target = j.value("p_target", p.p_target);
    p.p_nontarget = j.value("p_nontarget", p.p_nontarget);
    p.p_spoof = j.value("p_spoof", p.p_spoof);
    p.c_miss_asv = j.value("c_miss_asv", p.c_miss_asv);
    p.c_fa_asv = j.value("c_fa_asv", p.c_fa_asv);
    p.c_miss_cm = j.value("c_miss_cm", p.c_miss_cm);
    p.c_fa_cm = j.value("c_fa_cm", p.c_fa_cm);
    p.p_miss_asv = j.value("p_miss_asv", p.p_miss_asv);
    p.p_fa_asv = j.value("p_fa_asv", p.p_fa_asv);
    p.p_miss_spoof_asv = j.value("p_miss_spoof_asv", p.p_miss_spoof_asv);
    std::string v = j.value("version", "legacy2019");
    if (v == "legacy2019")
      p.version = TdcfVersion::legacy2019;
    else if (v == "revised")
      p.version = TdcfVersion::revised;
    else
      throw MetricError("tdcf: unknown version '" + v + "'");
    p.validate();
    return p;
  }
};

struct TdcfResult {
  double min_tdcf = 0.0;
  double threshold = 0.0;
};

// tandem constants; the normalized cost at CM threshold s is
//   legacy : (C1*Pmiss_cm + C2*Pfa_cm) / min(C1, C2)
//   revised: (C0 + C1*Pmiss_cm + C2*Pfa_cm) / (C0 + min(C1, C2))
struct TdcfConstants {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
};

inline TdcfConstants tdcf_constants(const TdcfParams& p) {
  p.validate();
  TdcfConstants k;
  if (p.version == TdcfVersion::legacy2019) {
    k.c0 = 0.0;
    k.c1 = p.p_target * (p.c_miss_cm - p.c_miss_asv * p.p_miss_asv) -
           p.p_nontarget * p.c_fa_asv * p.p_fa_asv;
    k.c2 = p.c_fa_cm * p.p_spoof * (1.0 - p.p_miss_spoof_asv);
  } else {
    k.c0 = p.p_target * p.c_miss_asv * p.p_miss_asv + p.p_nontarget * p.c_fa_asv * p.p_fa_asv;
    k.c1 = p.p_target * p.c_miss_cm * (1.0 - p.p_miss_asv) - k.c0;
    k.c2 = p.p_spoof * p.c_fa_cm * (1.0 - p.p_miss_spoof_asv);
  }
  if (k.c1 <= 0.0 || k.c2 <= 0.0)
    throw MetricError("tdcf: degenerate parameters (C1 or C2 not positive)");
  return k;
}

inline TdcfResult compute_min_tdcf(const std::vector<double>& bona,
                                   const std::vector<double>& spoof, const TdcfParams& p) {
  detail::require_two_classes(bona, spoof, "compute_min_tdcf");
  TdcfConstants k = tdcf_constants(p);
  double denom = k.c0 + std::min(k.c1, k.c2);
  std::vector<DetPoint> pts = det_points(bona, spoof);
  TdcfResult best;
  best.min_tdcf = std::numeric_limits<double>::infinity();
  for (const DetPoint& pt : pts) {
    double cost = (k.c0 + k.c1 * pt.frr + k.c2 * pt.far) / denom;
    if (cost < best.min_tdcf) {
      best.min_tdcf = cost;
      best.threshold = pt.threshold;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// fusion and score files

inline ScoreSet fuse_scores(const std::vector<ScoreSet>& sets) {
  if (sets.size() < 2) throw MetricError("fuse_scores: need at least two score sets");
  for (std::size_t i = 1; i < sets.size(); ++i) {
    std::vector<std::string> missing;
    for (const auto& [utt, s] : sets[0].scores)
      if (!sets[i].scores.count(utt)) missing.push_back(utt);
    for (const auto& [utt, s] : sets[i].scores)
      if (!sets[0].scores.count(utt)) missing.push_back(utt);
    if (!missing.empty()) {
      std::string msg = "fuse_scores: utt_id mismatch between sets 0 and " + std::to_string(i) + ":";
      for (const auto& u : missing) msg += " " + u;
      throw MetricError(msg);
    }
  }
  ScoreSet out;
  for (const auto& [utt, s] : sets[0].scores) {
    double acc = 0.0;
    for (const auto& set : sets) acc += set.scores.at(utt);
    out.scores[utt] = acc / static_cast<double>(sets.size());
  }
  return out;
}

inline void write_score_file(const std::string& path, const ScoreSet& s) {
  std::ofstream f(path);
  if (!f) throw MetricError("write_score_file: cannot open " + path);
  char buf[64];
  for (const auto& [utt, score] : s.scores) {
    std::snprintf(buf, sizeof(buf), "%.9g", score);
    f << utt << " " << buf << "\n";
  }
}

inline ScoreSet read_score_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MetricError("read_score_file: cannot open " + path);
  ScoreSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string utt;
    double score;
    if (!(ss >> utt >> score) || !std::isfinite(score))
      throw MetricError("read_score_file: malformed line " + std::to_string(lineno) + " in " +
                        path);
    out.scores[utt] = score;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ASV operating rates from an organizer score file. Accepts lines whose last
// two fields are KEY SCORE with KEY in {target, nontarget, spoof}; leading
// fields (speaker, utterance, attack id) are ignored. Rates are taken at the
// target/nontarget EER threshold.

struct AsvRates {
  double p_miss_asv = 0.0;
  double p_fa_asv = 0.0;
  double p_miss_spoof_asv = 0.0;
  double threshold = 0.0;
};

inline AsvRates asv_rates_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MetricError("asv_rates: cannot open " + path);
  std::vector<double> target, nontarget, spoof;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
    if (fields.size() < 2)
      throw MetricError("asv_rates: malformed line " + std::to_string(lineno) + " in " + path);
    const std::string& key = fields[fields.size() - 2];
    double score;
    try {
      score = std::stod(fields.back());
    } catch (const std::exception&) {
      throw MetricError("asv_rates: bad score on line " + std::to_string(lineno) + " in " + path);
    }
    if (key == "target")
      target.push_back(score);
    else if (key == "nontarget")
      nontarget.push_back(score);
    else if (key == "spoof")
      spoof.push_back(score);
    else
      throw MetricError("asv_rates: bad key '" + key + "' on line " + std::to_string(lineno) +
                        " in " + path);
  }
  if (target.empty() || nontarget.empty() || spoof.empty())
    throw MetricError("asv_rates: need target, nontarget and spoof trials in " + path);
  EerResult eer = compute_eer(target, nontarget);
  AsvRates r;
  r.threshold = eer.threshold;
  auto frac_below = [&](const std::vector<double>& v) {
    std::size_t n = 0;
    for (double s : v) n += s < eer.threshold ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(v.size());
  };
  r.p_miss_asv = frac_below(target);
  r.p_fa_asv = 1.0 - frac_below(nontarget);
  r.p_miss_spoof_asv = frac_below(spoof);
  return r;
}

// ---------------------------------------------------------------------------
// splitting a score set by protocol keys

template <class Records>
inline void split_scores(const ScoreSet& s, const Records& records, std::vector<double>* bona,
                         std::vector<double>* spoof) {
  std::vector<std::string> missing;
  for (const auto& r : records) {
    auto it = s.scores.find(r.utt_id);
    if (it == s.scores.end()) {
      missing.push_back(r.utt_id);
      continue;
    }
    (r.bonafide ? bona : spoof)->push_back(it->second);
  }
  if (!missing.empty()) {
    std::string msg = "split_scores: missing scores for:";
    std::size_t shown = 0;
    for (const auto& u : missing) {
      msg += " " + u;
      if (++shown >= 20) {
        msg += " ... (" + std::to_string(missing.size()) + " total)";
        break;
      }
    }
    throw MetricError(msg);
  }
}

}  // namespace antispoof
