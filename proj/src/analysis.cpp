#include "eegatt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "eegatt/error.hpp"
#include "eegatt/io.hpp"
#include "eegatt/models.hpp"
#include "eegatt/render.hpp"
#include "json.hpp"

namespace eegatt::analysis {

namespace {

std::size_t task_classes(std::string_view task) {
  if (task == models::kRelativeTask) return kRelativeClasses;
  if (task == models::kAttendedTask) return 2;
  fail(ErrorCode::kConfig, "unknown task '" + std::string(task) + "'");
}

std::string class_name(std::string_view task, std::size_t k) {
  if (task == models::kAttendedTask) return side_name(static_cast<Side>(k));
  return "class" + std::to_string(k);
}

double mean_abs(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string filters_csv(const SpatialFilterSet& filters, const Montage& montage) {
  if (static_cast<std::size_t>(filters.weights.cols()) != montage.size()) {
    fail(ErrorCode::kDimension, "montage has " + std::to_string(montage.size()) + " sites, filters span " +
                                    std::to_string(filters.weights.cols()));
  }
  std::ostringstream os;
  os << "filter,bias";
  for (const auto& l : montage.labels) os << ',' << l;
  os << '\n';
  for (Eigen::Index f = 0; f < filters.weights.rows(); ++f) {
    os << "Spatial" << f + 1 << ',' << io::format_double(filters.bias(f));
    for (Eigen::Index e = 0; e < filters.weights.cols(); ++e) os << ',' << io::format_double(filters.weights(f, e));
    os << '\n';
  }
  return os.str();
}

// ---- ERP maps ------------------------------------------------------------------------

ErpFeatureMap erp_feature_map(const SpatialFilterSet& filters, const EpochedDataset& data,
                              std::span<const std::size_t> idx, std::size_t filter, std::string_view task) {
  const std::size_t k = task_classes(task);
  const auto labels = models::task_labels(data, idx, task);
  const Eigen::MatrixXd out = filter_outputs(filters, data, idx, filter);
  ErpFeatureMap m;
  m.task = std::string(task);
  m.filter = filter;
  m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), out.cols());
  m.counts.assign(k, 0);
  m.time_ms = data.time_ms();
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const auto c = static_cast<std::size_t>(labels[n]);
    m.values.row(static_cast<Eigen::Index>(c)) += out.row(static_cast<Eigen::Index>(n));
    ++m.counts[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (m.counts[c] == 0) fail(ErrorCode::kMissingClass, "no samples of " + std::string(task) + " " + class_name(task, c));
    m.values.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(m.counts[c]);
  }
  return m;
}

ErpFeatureMap erp_feature_map(const nn::Network& net, const EpochedDataset& data, std::span<const std::size_t> idx,
                              std::size_t filter, std::string_view task) {
  return erp_feature_map(extract_spatial_filters(net), data, idx, filter, task);
}

std::string erp_map_csv(const ErpFeatureMap& map) {
  std::ostringstream os;
  os << "time_ms";
  for (Eigen::Index c = 0; c < map.values.rows(); ++c) os << ',' << class_name(map.task, static_cast<std::size_t>(c));
  os << '\n';
  for (Eigen::Index t = 0; t < map.values.cols(); ++t) {
    os << io::format_double(map.time_ms[static_cast<std::size_t>(t)]);
    for (Eigen::Index c = 0; c < map.values.rows(); ++c) os << ',' << io::format_double(map.values(c, t));
    os << '\n';
  }
  return os.str();
}

std::string erp_map_svg(const ErpFeatureMap& map, const std::string& title) {
  std::vector<render::Series> series;
  for (Eigen::Index c = 0; c < map.values.rows(); ++c) {
    const Eigen::VectorXd row = map.values.row(c).transpose();
    series.push_back({class_name(map.task, static_cast<std::size_t>(c)), {row.data(), row.data() + row.size()}});
  }
  return render::line_plot_svg(series, {title, "time from onset (ms)", "filter output", map.time_ms});
}

// ---- slopes --------------------------------------------------------------------------

SlopeSeries slope_analysis(const ErpFeatureMap& map) {
  if (map.values.rows() != kRelativeClasses) fail(ErrorCode::kDimension, "slope analysis needs the five relative classes");
  const auto t_count = static_cast<std::size_t>(map.values.cols());
  SlopeSeries s;
  s.slope.resize(t_count);
  s.intercept.resize(t_count);
  s.residual.resize(t_count);
  s.time_ms = map.time_ms;
  // locations 1..4: mean 2.5, sum of squared deviations 5
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    double ybar = 0.0;
    for (int x = 1; x <= 4; ++x) ybar += map.values(x, ti);
    ybar /= 4.0;
    double sxy = 0.0;
    for (int x = 1; x <= 4; ++x) sxy += (x - 2.5) * (map.values(x, ti) - ybar);
    const double b = sxy / 5.0;
    const double a = ybar - 2.5 * b;
    double rss = 0.0;
    for (int x = 1; x <= 4; ++x) {
      const double e = map.values(x, ti) - (a + b * x);
      rss += e * e;
    }
    s.slope[t] = b;
    s.intercept[t] = a;
    s.residual[t] = rss;
  }
  return s;
}

double gradient_from_slopes(const SlopeSeries& series, std::span<const double> shape, double baseline_end_ms) {
  if (shape.size() != series.slope.size() || series.time_ms.size() != series.slope.size()) {
    fail(ErrorCode::kDimension, "shape and slope series differ in length");
  }
  double base = 0.0;
  std::size_t nb = 0;
  for (std::size_t t = 0; t < series.slope.size(); ++t) {
    if (series.time_ms[t] < baseline_end_ms) {
      base += series.slope[t];
      ++nb;
    }
  }
  if (nb > 0) base /= static_cast<double>(nb);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < shape.size(); ++t) {
    num += (series.slope[t] - base) * shape[t];
    den += shape[t] * shape[t];
  }
  if (!(den > 0.0)) fail(ErrorCode::kNumerical, "gradient shape is identically zero");
  return -num / den;
}

std::string slope_csv(const SlopeSeries& series) {
  std::ostringstream os;
  os << "time_ms,slope,intercept,residual\n";
  for (std::size_t t = 0; t < series.slope.size(); ++t) {
    os << io::format_double(series.time_ms[t]) << ',' << io::format_double(series.slope[t]) << ','
       << io::format_double(series.intercept[t]) << ',' << io::format_double(series.residual[t]) << '\n';
  }
  return os.str();
}

std::string slope_svg(const SlopeSeries& series, const std::string& title) {
  return render::line_plot_svg({{"slope", series.slope}},
                               {title, "time from onset (ms)", "slope per location step", series.time_ms});
}

// ---- topography ----------------------------------------------------------------------

Topography topography(std::span<const double> weights, const Montage& montage, const TopographyConfig& cfg) {
  montage.validate();
  if (weights.size() != montage.size()) {
    fail(ErrorCode::kDimension, "montage '" + montage.name + "' has " + std::to_string(montage.size()) + " sites, got " +
                                    std::to_string(weights.size()) + " weights");
  }
  if (cfg.grid < 2) fail(ErrorCode::kConfig, "topography grid needs at least 2 cells per side");
  Topography t;
  t.labels = montage.labels;
  t.weights.assign(weights.begin(), weights.end());
  double rmax = 0.0;
  for (const auto& p : montage.positions) {
    t.points.push_back(project_azimuthal(p));
    rmax = std::max(rmax, std::hypot(t.points.back()[0], t.points.back()[1]));
  }
  t.head_radius = rmax * 1.05;
  t.extent = t.head_radius;

  const std::size_t g = cfg.grid;
  const double step = 2.0 * t.extent / static_cast<double>(g);
  std::vector<Vec3> targets;
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t c = 0; c < g; ++c) {
      const double x = -t.extent + (static_cast<double>(c) + 0.5) * step;
      const double y = t.extent - (static_cast<double>(r) + 0.5) * step;
      if (std::hypot(x, y) > t.head_radius) continue;
      targets.push_back(unproject_azimuthal(x, y));
      cells.emplace_back(r, c);
    }
  }
  const SphericalSpline spline(montage.positions, cfg.spline);
  const auto values = spline.evaluate(weights, targets);
  t.grid = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g),
                                     std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    t.grid(static_cast<Eigen::Index>(cells[i].first), static_cast<Eigen::Index>(cells[i].second)) = values[i];
  }
  return t;
}

std::string topography_csv(const Topography& topo) {
  std::ostringstream os;
  os << "label,x,y,weight\n";
  for (std::size_t i = 0; i < topo.labels.size(); ++i) {
    os << topo.labels[i] << ',' << io::format_double(topo.points[i][0]) << ',' << io::format_double(topo.points[i][1]) << ','
       << io::format_double(topo.weights[i]) << '\n';
  }
  return os.str();
}

std::string topography_grid_csv(const Topography& topo) {
  std::ostringstream os;
  os << "row,col,x,y,value\n";
  const auto g = topo.grid.rows();
  const double step = 2.0 * topo.extent / static_cast<double>(g);
  for (Eigen::Index r = 0; r < g; ++r) {
    for (Eigen::Index c = 0; c < topo.grid.cols(); ++c) {
      const double v = topo.grid(r, c);
      if (!std::isfinite(v)) continue;
      os << r << ',' << c << ',' << io::format_double(-topo.extent + (static_cast<double>(c) + 0.5) * step) << ','
         << io::format_double(topo.extent - (static_cast<double>(r) + 0.5) * step) << ',' << io::format_double(v) << '\n';
    }
  }
  return os.str();
}

std::string topography_svg(const Topography& topo, const std::string& title) {
  std::vector<render::Marker> markers;
  for (std::size_t i = 0; i < topo.labels.size(); ++i) markers.push_back({topo.points[i][0], topo.points[i][1], topo.labels[i]});
  return render::topography_svg(topo.grid, topo.extent, markers, title);
}

// ---- logistic ranking ----------------------------------------------------------------

Eigen::MatrixXd LogisticModel::probabilities(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd z = (X * weights).rowwise() + bias;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

std::vector<int> LogisticModel::predict(const Eigen::MatrixXd& X) const {
  const Eigen::MatrixXd p = probabilities(X);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < p.cols(); ++k) {
      if (p(i, k) > p(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& X, std::span<const int> labels, std::size_t classes,
                           const LogisticConfig& cfg) {
  if (static_cast<std::size_t>(X.rows()) != labels.size()) fail(ErrorCode::kDimension, "features and labels differ in length");
  if (X.rows() == 0) fail(ErrorCode::kMissingClass, "no training samples");
  const auto k = static_cast<Eigen::Index>(classes);
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(X.rows(), k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) fail(ErrorCode::kLabel, "label out of range");
    onehot(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  LogisticModel m{Eigen::MatrixXd::Zero(X.cols(), k), Eigen::RowVectorXd::Zero(k)};
  Eigen::MatrixXd mw = m.weights, vw = m.weights;
  Eigen::RowVectorXd mb = m.bias, vb = m.bias;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const Eigen::MatrixXd d = (m.probabilities(X) - onehot) * inv_n;
    const Eigen::MatrixXd gw = X.transpose() * d + cfg.l2 * m.weights;
    const Eigen::RowVectorXd gb = d.colwise().sum();
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw.cwiseProduct(gw);
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb.cwiseProduct(gb);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(it));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(it));
    m.weights.array() -= cfg.learning_rate * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
    m.bias.array() -= cfg.learning_rate * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
  }
  return m;
}

std::vector<FilterAccuracy> rank_filters_by_classification(const nn::Network& net, const EpochedDataset& data,
                                                           std::string_view task, const LogisticConfig& cfg) {
  const std::size_t k = task_classes(task);
  const auto filters = extract_spatial_filters(net);
  const auto train = data.indices(Split::kTrain);
  const auto test = data.indices(Split::kTest);
  if (train.empty()) fail(ErrorCode::kMissingClass, "train split is empty");
  if (test.empty()) fail(ErrorCode::kMissingClass, "test split is empty");
  const auto y_train = models::task_labels(data, train, task);
  const auto y_test = models::task_labels(data, test, task);
  auto accuracy = [](const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(a.size());
  };
  std::vector<FilterAccuracy> rows;
  for (std::size_t f = 0; f < filters.size(); ++f) {
    Eigen::MatrixXd xtr = filter_outputs(filters, data, train, f);
    Eigen::MatrixXd xte = filter_outputs(filters, data, test, f);
    const Eigen::RowVectorXd mean = xtr.colwise().mean();
    Eigen::RowVectorXd sd = ((xtr.rowwise() - mean).array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j) {
      if (!(sd(j) > 1e-12)) sd(j) = 1.0;
    }
    xtr = (xtr.rowwise() - mean).array().rowwise() / sd.array();
    xte = (xte.rowwise() - mean).array().rowwise() / sd.array();
    const auto model = fit_logistic(xtr, y_train, k, cfg);
    rows.push_back({f, accuracy(model.predict(xte), y_test), accuracy(model.predict(xtr), y_train)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const FilterAccuracy& a, const FilterAccuracy& b) { return a.accuracy > b.accuracy; });
  return rows;
}

std::string classification_ranking_csv(const std::vector<FilterAccuracy>& rows) {
  std::ostringstream os;
  os << "rank,filter,accuracy,train_accuracy\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << i + 1 << ",Spatial" << rows[i].filter + 1 << ',' << io::format_double(rows[i].accuracy) << ','
       << io::format_double(rows[i].train_accuracy) << '\n';
  }
  return os.str();
}

// ---- differential samples ------------------------------------------------------------

DifferentialReport differential_sample_analysis(const nn::Network& mtm, const nn::Network& single,
                                                const EpochedDataset& data, std::span<const std::size_t> idx) {
  const auto filters = extract_spatial_filters(mtm);
  DifferentialReport r;
  r.time_ms = data.time_ms();
  r.disagreement_map.assign(data.time_points(), 0.0);
  r.reference_map.assign(data.time_points(), 0.0);
  if (idx.empty()) return r;
  const auto truth = models::task_labels(data, idx, models::kAttendedTask);
  const auto pm = models::argmax_rows(models::predict(mtm, data, idx).for_task(models::kAttendedTask));
  const auto ps = models::argmax_rows(models::predict(single, data, idx).for_task(models::kAttendedTask));

  Eigen::RowVectorXd dis = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(data.time_points()));
  Eigen::RowVectorXd ref = dis;
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const bool single_ok = ps[n] == truth[n];
    const bool mtm_ok = pm[n] == truth[n];
    if (!single_ok && !mtm_ok) continue;
    const Eigen::RowVectorXd series = sample_outputs(filters, data, idx[n], false).colwise().mean();
    if (single_ok) {
      r.reference.push_back(idx[n]);
      ref += series;
    } else {
      r.disagreement.push_back(idx[n]);
      dis += series;
      ++r.per_speaker[static_cast<std::size_t>(data.info(idx[n]).speaker - 1)];
    }
  }
  r.total = r.disagreement.size();
  if (!r.disagreement.empty()) dis /= static_cast<double>(r.disagreement.size());
  if (!r.reference.empty()) ref /= static_cast<double>(r.reference.size());
  r.disagreement_map.assign(dis.data(), dis.data() + dis.size());
  r.reference_map.assign(ref.data(), ref.data() + ref.size());
  r.disagreement_mean_abs = mean_abs(r.disagreement_map);
  r.reference_mean_abs = mean_abs(r.reference_map);
  return r;
}

std::string DifferentialReport::to_json() const {
  static constexpr const char* kAngles[] = {"-90", "-45", "0", "+45", "+90"};
  nlohmann::ordered_json j;
  j["total"] = total;
  nlohmann::ordered_json loc = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < per_speaker.size(); ++s) {
    loc.push_back({{"speaker", s + 1}, {"angle_deg", kAngles[s]}, {"count", per_speaker[s]}});
  }
  j["per_location"] = loc;
  j["reference_total"] = reference.size();
  j["disagreement_mean_abs"] = disagreement_mean_abs;
  j["reference_mean_abs"] = reference_mean_abs;
  return j.dump(2) + "\n";
}

std::string DifferentialReport::maps_csv() const {
  std::ostringstream os;
  os << "time_ms,disagreement,reference\n";
  for (std::size_t t = 0; t < time_ms.size(); ++t) {
    os << io::format_double(time_ms[t]) << ',' << io::format_double(disagreement_map[t]) << ','
       << io::format_double(reference_map[t]) << '\n';
  }
  return os.str();
}

std::string differential_svg(const DifferentialReport& report, const std::string& title) {
  return render::line_plot_svg({{"disagreement (n=" + std::to_string(report.disagreement.size()) + ")", report.disagreement_map},
                                {"single-task correct (n=" + std::to_string(report.reference.size()) + ")", report.reference_map}},
                               {title, "time from onset (ms)", "mean filter output", report.time_ms});
}

}  // namespace eegatt::analysis
