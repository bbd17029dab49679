#include "psf/recognition.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace psf {

FeatureVector extract_features(const PostureSnapshot& posture, const HandModel& hand,
                               const std::vector<std::optional<SlopeMetrics>>& slopes) {
  if (posture.angles.size() != hand.size() || slopes.size() != hand.size())
    throw ParameterError("features: posture and slopes must cover every finger");
  std::vector<double> angles;
  for (std::size_t i = 0; i < hand.size(); ++i) {
    angles.push_back(posture.angles[i].x());
    if (!hand.fingers[i].single_joint()) angles.push_back(posture.angles[i].y());
  }
  if (angles.size() != kFeatureDim - 1)
    throw ParameterError("features: hand must have exactly nine joints");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : slopes) {
    if (!s || s->undefined) continue;
    sum += s->global_slope;
    ++n;
  }
  if (n == 0) throw NoGraspError("no finger made distal contact");
  FeatureVector f;
  std::copy(angles.begin(), angles.end(), f.v.begin());
  f.v[kFeatureDim - 1] = std::max(0.0, sum / static_cast<double>(n));
  return f;
}

std::map<std::string, std::size_t> LabeledDataset::counts() const {
  std::map<std::string, std::size_t> c;
  for (const LabeledSample& s : samples) ++c[s.label];
  return c;
}

Standardizer Standardizer::fit(const LabeledDataset& d) {
  if (d.samples.empty()) throw ParameterError("cannot standardize an empty dataset");
  Standardizer s;
  const double n = static_cast<double>(d.size());
  for (std::size_t j = 0; j < kFeatureDim; ++j) {
    double m = 0.0;
    for (const LabeledSample& x : d.samples) m += x.f.v[j];
    m /= n;
    double var = 0.0;
    for (const LabeledSample& x : d.samples) var += (x.f.v[j] - m) * (x.f.v[j] - m);
    const double sd = std::sqrt(var / n);
    s.mean[j] = m;
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

FeatureVector Standardizer::apply(const FeatureVector& f) const {
  FeatureVector out;
  for (std::size_t j = 0; j < kFeatureDim; ++j) out.v[j] = (f.v[j] - mean[j]) / scale[j];
  return out;
}

KnnResult knn_classify(const FeatureVector& query, const LabeledDataset& data, std::size_t k,
                       bool standardize) {
  if (data.samples.empty()) throw ParameterError("k-NN needs a non-empty dataset");
  if (k == 0 || k > data.size()) throw ParameterError("k-NN needs 1 <= k <= dataset size");
  std::optional<Standardizer> st;
  if (standardize) st = Standardizer::fit(data);
  const FeatureVector q = st ? st->apply(query) : query;
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const FeatureVector x = st ? st->apply(data.samples[i].f) : data.samples[i].f;
    double d2 = 0.0;
    for (std::size_t j = 0; j < kFeatureDim; ++j) d2 += (x.v[j] - q.v[j]) * (x.v[j] - q.v[j]);
    dist.emplace_back(d2, i);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  KnnResult r;
  r.k = k;
  std::map<std::string, std::size_t> votes;
  for (std::size_t i = 0; i < k; ++i) {
    r.neighbors.push_back(dist[i].second);
    ++votes[data.samples[dist[i].second].label];
  }
  std::size_t best = 0;
  for (const auto& [label, v] : votes) best = std::max(best, v);
  for (std::size_t idx : r.neighbors) {
    const std::string& label = data.samples[idx].label;
    if (votes[label] == best) {
      r.label = label;
      r.votes = best;
      break;
    }
  }
  return r;
}

LeaveOutReport leave_two_out(const LabeledDataset& d, std::size_t k) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < d.size(); ++i) by_label[d.samples[i].label].push_back(i);
  LeaveOutReport rep;
  for (const auto& [label, idx] : by_label) {
    for (std::size_t a = 0; a < idx.size(); a += 2) {
      std::vector<std::size_t> out{idx[a]};
      if (a + 1 < idx.size()) out.push_back(idx[a + 1]);
      LabeledDataset train;
      for (std::size_t i = 0; i < d.size(); ++i)
        if (std::find(out.begin(), out.end(), i) == out.end()) train.samples.push_back(d.samples[i]);
      for (std::size_t i : out) {
        ++rep.total;
        if (knn_classify(d.samples[i].f, train, k).label == d.samples[i].label) ++rep.correct;
      }
    }
  }
  return rep;
}

namespace {

// k_obj <= 0 means rigid.
CatalogObject make_entry(ObjectShape shape, double radius, double k_obj, double taper = 0.0) {
  CatalogObject c;
  c.object.shape = shape;
  c.object.radius = radius;
  c.object.taper = taper;
  c.object.center = {0.0, 0.0};
  if (k_obj > 0.0) {
    c.object.stiffness = Stiffness::soft;
    c.object.k_obj = k_obj;
  }
  std::ostringstream g;
  g << to_string(shape) << "-r" << radius;
  c.geometry = g.str();
  c.label = c.geometry + (k_obj <= 0.0 ? "-rigid" : k_obj < 1.0 ? "-soft" : "-medium");
  return c;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<CatalogObject> object_catalog() {
  std::vector<CatalogObject> c;
  for (double r : {15.0, 20.0, 25.0, 30.0})
    for (double k : {0.0, 0.5}) c.push_back(make_entry(ObjectShape::cylinder, r, k));
  c.push_back(make_entry(ObjectShape::cylinder, 25.0, 2.0));
  for (double r : {20.0, 28.0})
    for (double k : {0.0, 0.5}) c.push_back(make_entry(ObjectShape::cone, r, k, -0.25));
  for (double r : {30.0, 36.0})
    for (double k : {0.0, 0.5}) c.push_back(make_entry(ObjectShape::sphere, r, k));
  return c;
}

std::string geometry_of(const std::string& label) {
  const auto dash = label.rfind('-');
  return dash == std::string::npos ? label : label.substr(0, dash);
}

GraspOutcome grasp_object(const ObjectModel& object, const RecognitionSetup& setup,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jit(-setup.jitter, setup.jitter);
  GraspSetup g;
  g.hand = setup.hand;
  g.object = object;
  const double dx = jit(rng), dy = jit(rng);
  g.object->center = setup.grasp_center + object.center + Vec2{dx, dy};
  g.solver = setup.solver;
  g.detector = setup.detector;
  g.control = setup.control;
  g.noise = {setup.noise_sigma, splitmix(seed)};
  return run_grasp(g);
}

FeatureVector grasp_features(const ObjectModel& object, const RecognitionSetup& setup,
                             std::uint64_t seed) {
  const GraspOutcome g = grasp_object(object, setup, seed);
  if (g.fault) throw NoGraspError("grasp fault: " + *g.fault);
  return extract_features(posture_snapshot(g, setup.hand, setup.detector), setup.hand, g.slopes);
}

LabeledDataset generate_dataset(const std::vector<CatalogObject>& catalog,
                                const RecognitionSetup& setup, std::size_t trials,
                                std::uint64_t seed, unsigned threads) {
  const std::size_t n = catalog.size() * trials;
  LabeledDataset d;
  d.samples.resize(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j = next++; j < n; j = next++) {
      const CatalogObject& c = catalog[j / trials];
      try {
        d.samples[j] = {grasp_features(c.object, setup, splitmix(seed ^ splitmix(j))), c.label};
      } catch (const std::exception& e) {
        errors[j] = c.label + ": " + e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  for (const std::string& e : errors)
    if (!e.empty()) throw NoGraspError("dataset generation failed for " + e);
  return d;
}

LeaveOutReport geometry_consistency(const std::vector<CatalogObject>& catalog,
                                    const LabeledDataset& data, const RecognitionSetup& setup,
                                    const std::vector<double>& k_obj, std::size_t trials,
                                    std::uint64_t seed, std::size_t k) {
  // One query geometry per distinct geometry label, in catalog order.
  std::vector<const CatalogObject*> geoms;
  for (const CatalogObject& c : catalog)
    if (std::none_of(geoms.begin(), geoms.end(),
                     [&](const CatalogObject* g) { return g->geometry == c.geometry; }))
      geoms.push_back(&c);
  LeaveOutReport rep;
  std::uint64_t q = 0;
  for (const CatalogObject* g : geoms)
    for (double kk : k_obj)
      for (std::size_t t = 0; t < trials; ++t, ++q) {
        ObjectModel o = g->object;
        o.stiffness = kk > 0.0 ? Stiffness::soft : Stiffness::rigid;
        o.k_obj = kk > 0.0 ? kk : 0.0;
        const FeatureVector f = grasp_features(o, setup, splitmix(seed ^ splitmix(q)));
        ++rep.total;
        if (geometry_of(knn_classify(f, data, k).label) == g->geometry) ++rep.correct;
      }
  return rep;
}

void write_dataset_csv(std::ostream& os, const LabeledDataset& d, const HandModel& hand) {
  for (const FingerParams& p : hand.fingers) {
    os << p.name << "_mcp_deg,";
    if (!p.single_joint()) os << p.name << "_pip_deg,";
  }
  os << "avg_slope_N_per_mm,label\n";
  os.precision(17);
  for (const LabeledSample& s : d.samples) {
    for (std::size_t j = 0; j + 1 < kFeatureDim; ++j) os << rad2deg(s.f.v[j]) << ',';
    os << s.f.slope() << ',' << s.label << '\n';
  }
}

LabeledDataset read_dataset_csv(std::istream& is) {
  LabeledDataset d;
  std::string line;
  if (!std::getline(is, line)) throw ParameterError("dataset CSV: missing header");
  if (std::count(line.begin(), line.end(), ',') != static_cast<long>(kFeatureDim))
    throw ParameterError("dataset CSV: header must have 11 columns");
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    LabeledSample s;
    std::string cell;
    try {
      for (std::size_t j = 0; j < kFeatureDim; ++j) {
        if (!std::getline(ls, cell, ',')) throw std::invalid_argument("short row");
        const double v = std::stod(cell);
        s.f.v[j] = j + 1 < kFeatureDim ? deg2rad(v) : v;
      }
      if (!std::getline(ls, s.label) || s.label.empty()) throw std::invalid_argument("no label");
    } catch (const std::exception&) {
      throw ParameterError("dataset CSV: malformed row " + std::to_string(row));
    }
    d.samples.push_back(s);
  }
  return d;
}

const char* to_string(SweepSide s) { return s == SweepSide::palmar ? "palmar" : "dorsal"; }

SweepSide sweep_side_from_string(const std::string& s) {
  if (s == "palmar") return SweepSide::palmar;
  if (s == "dorsal") return SweepSide::dorsal;
  throw ParameterError("unknown sweep side '" + s + "'");
}

namespace {

const CatalogObject& find_entry(const std::vector<CatalogObject>& catalog,
                                const std::string& label) {
  for (const CatalogObject& c : catalog)
    if (c.label == label) return c;
  throw ParameterError("unknown catalog object '" + label + "'");
}

}  // namespace

BlindResult blind_sweep(const BlindScene& scene, const std::vector<CatalogObject>& catalog,
                        const LabeledDataset& data, const RecognitionSetup& setup,
                        const SweepConfig& sweep, std::uint64_t seed) {
  if (!(scene.length > 0.0) || !(sweep.speed > 0.0))
    throw ParameterError("sweep needs a positive line length and speed");
  if (sweep.sensing_finger >= setup.hand.size())
    throw ParameterError("sensing finger out of range");
  for (const ScenePlacement& o : scene.objects) {
    find_entry(catalog, o.label);
    if (o.along < 0.0 || o.along > scene.length)
      throw ParameterError("object '" + o.label + "' lies outside the sweep line");
  }

  const std::size_t fi = sweep.sensing_finger;
  const double duration = scene.length / sweep.speed;
  const HoldContext ctx =
      preloaded_hold(setup.hand.fingers[fi], setup.hand.sea, setup.hand.finger_orientation(fi),
                     setup.solver, sweep.preload, duration);
  const std::size_t n = static_cast<std::size_t>(std::llround(duration * ctx.rate));

  BlindResult r;
  const SweepSide sides[] = {SweepSide::palmar, SweepSide::dorsal, SweepSide::palmar};
  for (int s = 0; s < 3; ++s) {
    const bool forward = s != 1;
    // First object met on this side, as (time of contact start, end, index).
    std::optional<std::tuple<double, double, std::size_t>> hit;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const ScenePlacement& o = scene.objects[i];
      if (o.side != sides[s]) continue;
      const double half = find_entry(catalog, o.label).object.radius;
      const double centre = forward ? o.along : scene.length - o.along;
      const double t0 = std::max(0.0, centre - half) / sweep.speed;
      const double t1 = std::min(scene.length, centre + half) / sweep.speed;
      if (!hit || t0 < std::get<0>(*hit)) hit = std::make_tuple(t0, t1, i);
    }
    SampledSignal sg;
    if (hit) {
      const DisturbanceKind kind = sides[s] == SweepSide::palmar ? DisturbanceKind::forced_flexion
                                                                 : DisturbanceKind::forced_extension;
      sg = inject_disturbance(ctx, {std::get<0>(*hit), std::get<1>(*hit), kind, sweep.magnitude, 1});
    } else {
      sg.rate = ctx.rate;
      for (std::size_t k = 0; k < n; ++k)
        sg.append(ctx.hold.x, ctx.hold.tension, ctx.hold.theta1, ctx.hold.theta2);
    }
    sg = synthesize_noise(sg, setup.noise_sigma, splitmix(seed + static_cast<std::uint64_t>(s)));
    SweepRecord rec{s + 1, sides[s], detect_disturbance(sg.tension, ctx.hold.tension, sweep.deadband)};
    r.sweeps.push_back(rec);
    if (rec.detection.kind == DisturbanceClass::none) continue;

    r.found = true;
    r.side = rec.detection.kind == DisturbanceClass::forced_extension ? SweepSide::dorsal
                                                                      : SweepSide::palmar;
    const double travelled = sweep.speed * static_cast<double>(*rec.detection.sample) / ctx.rate;
    r.position = forward ? travelled : scene.length - travelled;
    r.approach = *r.side == SweepSide::dorsal ? "behind" : "front";
    // The object grasped is the one on the detected side nearest the contact point.
    std::optional<std::size_t> target;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      if (scene.objects[i].side != *r.side) continue;
      if (!target || std::abs(scene.objects[i].along - *r.position) <
                         std::abs(scene.objects[*target].along - *r.position))
        target = i;
    }
    if (!target) break;  // signature on a side with no object: report without grasping
    const CatalogObject& c = find_entry(catalog, scene.objects[*target].label);
    r.truth_label = c.label;
    r.grasp = grasp_object(c.object, setup, splitmix(seed ^ 0x5eedULL));
    if (!r.grasp->fault) {
      try {
        r.features = extract_features(posture_snapshot(*r.grasp, setup.hand, setup.detector),
                                      setup.hand, r.grasp->slopes);
        r.result = knn_classify(*r.features, data, 3);
      } catch (const NoGraspError&) {
      }
    }
    break;
  }
  return r;
}

}  // namespace psf
