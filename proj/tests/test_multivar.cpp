#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"
#include "voxel2vec/abc_flow.hpp"
#include "voxel2vec/features.hpp"
#include "voxel2vec/trainer.hpp"

using namespace voxel2vec;
using v2v_test::temp_dir;

namespace {

point_set make_points(std::size_t dim, const std::vector<std::vector<double>>& rows) {
  point_set p;
  p.count = rows.size();
  p.dimension = dim;
  for (const auto& r : rows) p.values.insert(p.values.end(), r.begin(), r.end());
  return p;
}

point_set random_points(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  point_set p;
  p.count = n;
  p.dimension = dim;
  for (std::size_t i = 0; i < n * dim; ++i) p.values.push_back(normal(rng));
  return p;
}

embedding_model trained_model(const std::vector<std::vector<float>>& rows) {
  embedding_model m(rows.size(), rows.front().size());
  for (symbol_id s = 0; s < rows.size(); ++s) std::copy(rows[s].begin(), rows[s].end(), m.center(s).begin());
  m.set_epochs_trained(1);
  return m;
}

symbol_volume symbols_from_levels(dims3 d, std::vector<std::uint32_t> levels, int R) {
  const std::vector<quantized_volume> q{quantized_volume(d, std::move(levels), R)};
  return symbolize(q).second;
}

symbol_volume checkerboard(std::size_t n) {
  const dims3 d{n, n, n};
  std::vector<std::uint32_t> levels(d.count());
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) levels[d.index(i, j, k)] = (i + j + k) % 2;
  return symbols_from_levels(d, std::move(levels), 2);
}

// Share of voxels that sit in a feature and belong to that feature's majority blob.
double blob_purity(const feature_set& fs, const v2v_test::two_blob_data& data) {
  const auto counts = symbol_counts(data.sv);
  double pure = 0.0;
  for (const auto& f : fs.features) {
    std::uint64_t side[2] = {0, 0};
    for (symbol_id s : f.symbols) side[data.blob(s)] += counts[s];
    pure += static_cast<double>(std::max(side[0], side[1]));
  }
  return pure / static_cast<double>(data.sv.size());
}

}  // namespace

TEST(Dbscan, TwoSeparatedGroups) {
  const auto pts = make_points(2, {{0, 0}, {0.1, 0}, {0, 0.1}, {5, 5}, {5.1, 5}, {5, 5.1}});
  const auto labels = dbscan(pts, 0.5, 3, distance_metric::euclidean);
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 0, 1, 1, 1}));
}

TEST(Dbscan, IsolatedPointIsNoise) {
  const auto pts = make_points(2, {{0, 0}, {0.1, 0}, {0, 0.1}, {9, 9}});
  const auto labels = dbscan(pts, 0.5, 3, distance_metric::euclidean);
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 0, noise_label}));
}

TEST(Dbscan, PointCountsItselfAndBoundaryIsInclusive) {
  // Two points exactly eps apart: each has two neighbours including itself.
  const auto pts = make_points(1, {{0.0}, {0.5}});
  EXPECT_EQ(dbscan(pts, 0.5, 2, distance_metric::euclidean), (std::vector<int>{0, 0}));
  EXPECT_EQ(dbscan(pts, 0.5, 3, distance_metric::euclidean), (std::vector<int>{noise_label, noise_label}));
  EXPECT_EQ(dbscan(pts, 0.5, 1, distance_metric::euclidean), (std::vector<int>{0, 0}));
}

TEST(Dbscan, BorderPointJoinsFirstCluster) {
  // 0.55 reaches a core on each side but is not a core itself; 0 is visited as noise
  // before its cluster claims it.
  const auto pts = make_points(1, {{0.0}, {0.05}, {0.1}, {0.55}, {1.0}, {1.05}, {1.1}});
  const auto labels = dbscan(pts, 0.46, 4, distance_metric::euclidean);
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(labels, v2v_test::reference_dbscan(pts, 0.46, 4, distance_metric::euclidean));
}

TEST(Dbscan, CosineZeroVectorIsFarFromEverything) {
  const auto pts = make_points(2, {{0, 0}, {1, 0}, {2, 0.01}, {3, 0}});
  const auto labels = dbscan(pts, 0.1, 2, distance_metric::cosine);
  EXPECT_EQ(labels, (std::vector<int>{noise_label, 0, 0, 0}));
}

TEST(Dbscan, MatchesReferenceOnRandomSet) {
  std::mt19937_64 rng(30);
  const auto pts = random_points(rng, 30, 5);
  for (auto metric : {distance_metric::euclidean, distance_metric::cosine}) {
    const double eps = metric == distance_metric::euclidean ? 2.0 : 0.3;
    EXPECT_EQ(dbscan(pts, eps, 3, metric), v2v_test::reference_dbscan(pts, eps, 3, metric));
  }
}

TEST(Dbscan, InvalidParameters) {
  const auto pts = make_points(1, {{0.0}});
  EXPECT_THROW(dbscan(pts, -1.0, 2, distance_metric::euclidean), parameter_error);
  EXPECT_THROW(dbscan(pts, 0.5, 0, distance_metric::euclidean), parameter_error);
  EXPECT_EQ(parse_metric("cosine"), distance_metric::cosine);
  EXPECT_THROW(parse_metric("manhattan"), parameter_error);
}

TEST(Classify, SingleBallIsOneFeatureCoveringEveryVoxel) {
  const dims3 d{4, 4, 4};
  std::vector<std::uint32_t> levels(d.count());
  for (std::size_t v = 0; v < levels.size(); ++v) levels[v] = v % 4;
  const auto sv = symbols_from_levels(d, levels, 4);
  const auto m = trained_model({{1, 0.01f}, {1, 0}, {1, -0.01f}, {1, 0.02f}});
  const auto fs = classify_features(m, sv);
  ASSERT_EQ(fs.features.size(), 1u);
  EXPECT_EQ(fs.features[0].voxel_count, 64u);
  EXPECT_EQ(fs.noise_voxels, 0u);
  EXPECT_EQ(fs.features[0].symbols.size(), 4u);
  EXPECT_EQ(fs.total_voxels(), 64u);
}

TEST(Classify, UntrainedModelIsRejected) {
  const auto sv = checkerboard(4);
  embedding_model m(2, 3);
  EXPECT_THROW(classify_features(m, sv), parameter_error);
}

TEST(Classify, MeanIsVoxelWeighted) {
  // Symbol 0 covers 3 voxels, symbol 1 one voxel.
  const auto sv = symbols_from_levels({4, 1, 1}, {0, 0, 0, 1}, 2);
  const auto m = trained_model({{1, 0}, {1, 0.2f}});
  classify_options opt;
  opt.eps = 0.1;
  opt.min_pts = 2;
  const auto fs = classify_features(m, sv, opt);
  ASSERT_EQ(fs.features.size(), 1u);
  EXPECT_NEAR(fs.features[0].mean[0], 1.0, 1e-12);
  EXPECT_NEAR(fs.features[0].mean[1], 0.25 * 0.2, 1e-7);
}

TEST(Classify, SmallFeaturesAreFlaggedNotDropped) {
  // Symbols 0 and 1 share a direction; symbol 2 points elsewhere and covers one voxel.
  const auto sv = symbols_from_levels({10, 1, 1}, {0, 0, 0, 0, 0, 1, 1, 1, 1, 2}, 4);
  const auto m = trained_model({{1, 0}, {1, 0.01f}, {0, 1}});
  classify_options opt;
  opt.min_pts = 1;
  opt.eps = 0.1;
  opt.min_voxels = 2;
  const auto fs = classify_features(m, sv, opt);
  ASSERT_EQ(fs.features.size(), 2u);
  EXPECT_FALSE(fs.features[0].filtered);
  EXPECT_TRUE(fs.features[1].filtered);
  EXPECT_EQ(fs.features[1].voxel_count, 1u);
  EXPECT_EQ(feature_color(fs.features[1]), gray);
}

TEST(Classify, DefaultMinVoxelsIsOneThousandth) {
  const auto sv = checkerboard(20);
  const auto m = trained_model({{1, 0}, {0, 1}});
  const auto fs = classify_features(m, sv);
  EXPECT_EQ(fs.min_voxels, 8u);
}

TEST(Classify, AbcFlowYieldsSeveralFeatures) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = gen_abc_flow({}, 0.0, {64, 64, 64});
    const std::vector<quantized_volume> q{quantize(f.vx, 16), quantize(f.s1, 16)};
    const auto sv = symbolize(q).second;
    train_config cfg;
    cfg.seed = seed;
    const auto model = train(sv, cfg).model;
    classify_options opt;
    opt.eps = 0.3;
    const auto fs = classify_features(model, sv, opt);
    EXPECT_GE(fs.features.size(), 2u) << "seed " << seed;
    EXPECT_LE(fs.features.size(), 30u) << "seed " << seed;
    EXPECT_EQ(fs.total_voxels(), sv.size());
  }
}

TEST(Classify, EmbeddingClustersAreAtLeastAsPureAsRawLevels) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto data = v2v_test::two_blob(32, 16, seed);
    train_config cfg;
    cfg.seed = seed;
    const auto model = train(data.sv, cfg).model;
    classify_options opt;
    const double embedded = blob_purity(classify_features(model, data.sv, opt), data);
    opt.raw_space = true;
    const double raw = blob_purity(classify_features(model, data.sv, opt), data);
    EXPECT_GE(embedded, raw) << "seed " << seed;
  }
}

TEST(Projection, SingleFeatureSitsAtOrigin) {
  feature_set fs;
  fs.features.resize(1);
  fs.features[0].mean = {0.3, 0.4};
  fs.features[0].voxel_count = 10;
  project_features(fs);
  EXPECT_EQ(fs.features[0].position, (point2{0.0, 0.0}));
  EXPECT_GT(fs.features[0].radius, 0.0);
  EXPECT_TRUE(fs.layout_resolved);
}

TEST(Projection, CoincidentMeansAreSeparated) {
  feature_set fs;
  fs.features.resize(2);
  for (int i = 0; i < 2; ++i) {
    fs.features[i].id = i;
    fs.features[i].mean = {1.0, 1.0};
    fs.features[i].voxel_count = 5 + 5 * i;
  }
  project_features(fs);
  const auto& a = fs.features[0];
  const auto& b = fs.features[1];
  EXPECT_GE(std::hypot(a.position[0] - b.position[0], a.position[1] - b.position[1]), a.radius + b.radius);
  EXPECT_TRUE(fs.layout_resolved);
  // Area tracks voxel count.
  EXPECT_NEAR(b.radius / a.radius, std::sqrt(2.0), 1e-12);
}

TEST(Projection, ManyDiscsEndWithoutOverlap) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<disc> discs(40);
  for (auto& d : discs) d = {{u(rng) * 0.1, u(rng) * 0.1}, 0.2 + 0.1 * u(rng)};
  const auto report = resolve_overlaps(discs);
  ASSERT_TRUE(report.resolved);
  for (std::size_t i = 0; i < discs.size(); ++i)
    for (std::size_t j = i + 1; j < discs.size(); ++j) EXPECT_FALSE(discs_overlap(discs[i], discs[j]));
}

TEST(Projection, IterationCapIsReported) {
  std::vector<disc> discs(30, disc{{0.0, 0.0}, 1.0});
  const auto report = resolve_overlaps(discs, 1);
  EXPECT_EQ(report.iterations, 1);
  EXPECT_FALSE(report.resolved);
}

TEST(Tsne, KlIsNonIncreasingInMonitoredPhase) {
  std::mt19937_64 rng(9);
  const auto pts = random_points(rng, 25, 6);
  tsne_options opt;
  opt.iterations = 400;
  const auto r = tsne_from_points(pts, opt);
  ASSERT_EQ(r.kl_history.size(), 400u);
  EXPECT_EQ(r.monitored_from, 200u);
  for (std::size_t i = r.monitored_from + 1; i < r.kl_history.size(); ++i)
    EXPECT_LE(r.kl_history[i], r.kl_history[i - 1]) << "iteration " << i;
  for (const auto& p : r.positions) EXPECT_TRUE(std::isfinite(p[0]) && std::isfinite(p[1]));
}

TEST(Tsne, SeparatesTwoDistantGroups) {
  point_set pts;
  pts.dimension = 3;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int g = 0; g < 2; ++g)
    for (int i = 0; i < 10; ++i)
      for (int a = 0; a < 3; ++a) pts.values.push_back(10.0 * g + n(rng));
  pts.count = 20;
  const auto r = tsne_from_points(pts);
  auto centroid = [&](int g) {
    point2 c{0, 0};
    for (int i = 0; i < 10; ++i) c = {c[0] + r.positions[g * 10 + i][0] / 10, c[1] + r.positions[g * 10 + i][1] / 10};
    return c;
  };
  const auto c0 = centroid(0), c1 = centroid(1);
  const double between = std::hypot(c0[0] - c1[0], c0[1] - c1[1]);
  for (int i = 0; i < 20; ++i) {
    const auto& own = i < 10 ? c0 : c1;
    EXPECT_LT(std::hypot(r.positions[i][0] - own[0], r.positions[i][1] - own[1]), between / 2);
  }
}

TEST(LabelVolume, CheckerboardIsReproduced) {
  const auto sv = checkerboard(6);
  const auto m = trained_model({{1, 0}, {0, 1}});
  classify_options opt;
  opt.eps = 0.1;
  opt.min_pts = 1;
  const auto fs = classify_features(m, sv, opt);
  const auto labels = label_voxels(fs, sv);
  for (std::size_t v = 0; v < sv.size(); ++v) EXPECT_EQ(labels[v], sv[v]);
}

TEST(LabelVolume, NoiseGetsReservedLabelAndFileRoundTrips) {
  const auto sv = symbols_from_levels({3, 2, 1}, {0, 1, 2, 0, 1, 2}, 3);
  const auto m = trained_model({{1, 0}, {1, 0.01f}, {0, 1}});
  classify_options opt;
  opt.eps = 0.1;
  opt.min_pts = 2;
  auto fs = classify_features(m, sv, opt);
  project_features(fs);
  const auto labels = label_voxels(fs, sv);
  EXPECT_EQ(labels, (std::vector<std::uint16_t>{0, 0, noise_voxel_label, 0, 0, noise_voxel_label}));

  temp_dir dir;
  export_label_volume(fs, sv, dir / "labels.raw", dir / "labels.json");
  EXPECT_EQ(read_u16_raw(dir / "labels.raw"), labels);
  const auto legend = json::parse(v2v_test::file_text(dir / "labels.json"));
  EXPECT_EQ(legend["noise_label"], 65535);
  EXPECT_EQ(legend["noise_voxels"], 2);
  EXPECT_EQ(legend["dims"], json::parse("[3,2,1]"));
  ASSERT_EQ(legend["features"].size(), 1u);
  EXPECT_EQ(legend["features"][0]["voxel_count"], 4);
  EXPECT_EQ(legend["features"][0]["symbols"], json::parse(R"(["0","1"])"));
  EXPECT_EQ(legend["raw"], "labels.raw");

  // Recounting the labels from disk gives the legend's counts.
  std::map<std::uint16_t, int> recount;
  for (auto l : read_u16_raw(dir / "labels.raw")) ++recount[l];
  EXPECT_EQ(recount[0], 4);
  EXPECT_EQ(recount[noise_voxel_label], 2);
}

TEST(LabelVolume, ScatterRendersAndSavesPng) {
  const auto sv = checkerboard(4);
  const auto m = trained_model({{1, 0}, {0, 1}});
  classify_options opt;
  opt.eps = 0.1;
  opt.min_pts = 1;
  auto fs = classify_features(m, sv, opt);
  project_features(fs);
  const auto img = render_feature_scatter(fs, 128);
  std::set<rgb> colors;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) colors.insert(img.at(x, y));
  EXPECT_TRUE(colors.count(palette_color(0)));
  EXPECT_TRUE(colors.count(palette_color(1)));
  temp_dir dir;
  write_png(dir / "scatter.png", img);
  const auto back = read_png(dir / "scatter.png");
  EXPECT_EQ(back.width(), 128u);
  EXPECT_EQ(back.at(64, 0), img.at(64, 0));
}
