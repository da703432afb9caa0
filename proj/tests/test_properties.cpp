// Randomized invariant checks. Each test sweeps a fixed list of seeds so failures reproduce.
#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

#include "support.hpp"
#include "voxel2vec/abc_flow.hpp"
#include "voxel2vec/features.hpp"
#include "voxel2vec/sampler.hpp"
#include "voxel2vec/similarity.hpp"
#include "voxel2vec/transfer.hpp"

using namespace voxel2vec;

namespace {

volume random_volume(std::mt19937_64& rng, dims3 d) {
  std::normal_distribution<double> normal(0.0, 3.0);
  std::vector<double> v(d.count());
  for (double& x : v) x = normal(rng);
  return volume(d, std::move(v));
}

embedding_model random_model(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  embedding_model m(n, d);
  for (float& v : m.centers()) v = normal(rng);
  for (float& v : m.contexts()) v = normal(rng);
  m.set_epochs_trained(1);
  return m;
}

point_set random_points(std::mt19937_64& rng, std::size_t n, std::size_t dim, double spread) {
  std::normal_distribution<double> normal(0.0, spread);
  point_set p;
  p.count = n;
  p.dimension = dim;
  for (std::size_t i = 0; i < n * dim; ++i) p.values.push_back(normal(rng));
  return p;
}

bool bitwise_equal(const volume& a, const volume& b) {
  return a.size() == b.size() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Property, QuantizationIsMonotone) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto v = random_volume(rng, {7, 6, 5});
    const int R = 2 + static_cast<int>(seed % 30);
    const auto q = quantize(v, R);
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) ASSERT_LE(q[order[i - 1]], q[order[i]]) << "seed " << seed;
    EXPECT_EQ(q[order.front()], 0u);
    EXPECT_EQ(q[order.back()], static_cast<std::uint32_t>(R - 1));
  }
}

TEST(Property, SymbolLookupInvertsSymbolization) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const dims3 d{6, 5, 4};
    const std::vector<quantized_volume> q{quantize(random_volume(rng, d), 5), quantize(random_volume(rng, d), 7),
                                          quantize(random_volume(rng, d), 3)};
    const auto [table, sv] = symbolize(q);
    std::uint64_t total = 0;
    for (symbol_id s = 0; s < table->size(); ++s) {
      EXPECT_EQ(table->find(table->combination(s)), s);
      total += table->frequency(s);
    }
    EXPECT_EQ(total, d.count());
    for (std::size_t v = 0; v < sv.size(); ++v) {
      const auto combo = table->combination(sv[v]);
      for (std::size_t a = 0; a < q.size(); ++a) ASSERT_EQ(combo[a], q[a][v]);
    }
  }
}

TEST(Property, AbcFlowRepeatsWhenSineTermVanishes) {
  const dims3 d{9, 8, 7};
  for (const auto& [t0, t1] : {std::pair{0.0, 20.0}, {10.0, 30.0}}) {
    const auto a = gen_abc_flow({}, t0, d);
    const auto b = gen_abc_flow({}, t1, d);
    EXPECT_TRUE(bitwise_equal(a.vx, b.vx));
    EXPECT_TRUE(bitwise_equal(a.vy, b.vy));
    EXPECT_TRUE(bitwise_equal(a.vz, b.vz));
    EXPECT_TRUE(bitwise_equal(a.s1, b.s1));
  }
}

TEST(Property, NegativeWeightsDependOnlyOnCounts) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> count(0, 1000);
    std::vector<std::uint64_t> counts(40);
    for (auto& c : counts) c = count(rng);
    counts[0] = 1;
    std::vector<std::size_t> perm(counts.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::uint64_t> permuted(counts.size());
    for (std::size_t s = 0; s < counts.size(); ++s) permuted[perm[s]] = counts[s];
    const negative_distribution a(counts), b(permuted);
    // The normalizing sum runs in a different order, so only the last bits may differ.
    for (std::size_t s = 0; s < counts.size(); ++s) {
      const double w = a.weight(static_cast<symbol_id>(s));
      EXPECT_NEAR(w, b.weight(static_cast<symbol_id>(perm[s])), 1e-14 * w);
    }
  }
}

TEST(Property, SimilarityIsSymmetricAndBounded) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto m = random_model(rng, 30, 1 + seed % 8);
    const auto map = compute_similarity_map(m);
    for (symbol_id a = 0; a < 30; ++a)
      for (symbol_id b = 0; b < 30; ++b) {
        EXPECT_EQ(map.values(a, b), map.values(b, a));
        EXPECT_GE(map.values(a, b), 0.0);
        EXPECT_LE(map.values(a, b), 1.0);
      }
    for (symbol_id a = 0; a < 30; ++a) EXPECT_EQ(map.values(a, a), 1.0);
  }
}

TEST(Property, SimilarityIgnoresDyadicScaling) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto m = random_model(rng, 20, 6);
    auto scaled = m;
    std::uniform_int_distribution<int> exponent(-6, 6);
    for (symbol_id s = 0; s < 20; ++s) {
      const float f = std::ldexp(1.0f, exponent(rng));
      for (float& v : scaled.center(s)) v *= f;
    }
    EXPECT_TRUE(compute_similarity_map(m).values == compute_similarity_map(scaled).values);
  }
}

TEST(Property, CosineDbscanIgnoresPositiveRescaling) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto pts = random_points(rng, 40, 4, 1.0);
    auto scaled = pts;
    std::uniform_int_distribution<int> exponent(-4, 4);
    for (std::size_t i = 0; i < pts.count; ++i) {
      const double f = std::ldexp(1.0, exponent(rng));
      for (std::size_t a = 0; a < pts.dimension; ++a) scaled.values[i * pts.dimension + a] *= f;
    }
    EXPECT_EQ(dbscan(pts, 0.4, 3, distance_metric::cosine), dbscan(scaled, 0.4, 3, distance_metric::cosine));
  }
}

TEST(Property, DbscanMatchesReferenceOnRandomInstances) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> count(1, 100), dim(1, 6);
  std::uniform_int_distribution<int> min_pts(1, 6);
  std::uniform_real_distribution<double> eps_scale(0.05, 1.5);
  for (int instance = 0; instance < 200; ++instance) {
    const auto metric = instance % 2 ? distance_metric::cosine : distance_metric::euclidean;
    const auto pts = random_points(rng, count(rng), dim(rng), 1.0);
    const double eps = metric == distance_metric::cosine ? eps_scale(rng) / 2 : eps_scale(rng) * std::sqrt(pts.dimension);
    const int mp = min_pts(rng);
    ASSERT_EQ(dbscan(pts, eps, mp, metric), v2v_test::reference_dbscan(pts, eps, mp, metric))
        << "instance " << instance << " metric " << to_string(metric);
  }
}

TEST(Property, FeaturesPartitionTheVolume) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const dims3 d{10, 10, 10};
    const std::vector<quantized_volume> q{quantize(random_volume(rng, d), 6), quantize(random_volume(rng, d), 4)};
    const auto sv = symbolize(q).second;
    const auto m = random_model(rng, sv.symbol_count(), 3);
    classify_options opt;
    opt.eps = 0.2;
    opt.min_pts = 2;
    auto fs = classify_features(m, sv, opt);
    project_features(fs);

    std::vector<int> owner(sv.symbol_count(), noise_label);
    for (const auto& f : fs.features)
      for (symbol_id s : f.symbols) {
        EXPECT_EQ(owner[s], noise_label) << "symbol in two features";
        owner[s] = f.id;
      }
    EXPECT_EQ(owner, fs.symbol_label);
    EXPECT_EQ(fs.total_voxels(), sv.size());
    const auto labels = label_voxels(fs, sv);
    for (std::size_t v = 0; v < sv.size(); ++v) {
      const int l = fs.symbol_label[sv[v]];
      EXPECT_EQ(labels[v], l == noise_label ? noise_voxel_label : l);
    }
    if (fs.layout_resolved) {
      for (std::size_t i = 0; i < fs.features.size(); ++i)
        for (std::size_t j = i + 1; j < fs.features.size(); ++j)
          EXPECT_FALSE(discs_overlap({fs.features[i].position, fs.features[i].radius},
                                     {fs.features[j].position, fs.features[j].radius}));
    }
  }
}

TEST(Property, AssociationIsSymmetricBoundedAndEquivariant) {
  std::mt19937_64 rng(7);
  const dims3 d{6, 6, 6};
  std::vector<std::vector<volume>> members;
  for (int i = 0; i < 4; ++i) members.push_back({random_volume(rng, d)});
  auto c = make_collection(members, 4);
  for (std::size_t i = 0; i < c.size(); ++i) c.models[i] = random_model(rng, c.table->size(), 4);
  const auto a = association_matrix(c);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(a(i, j), a(j, i));
      EXPECT_GE(a(i, j), 0.0);
      EXPECT_LE(a(i, j), 1.0);
    }

  const std::vector<std::size_t> perm{2, 0, 3, 1};
  volume_collection p;
  p.table = c.table;
  for (auto i : perm) {
    p.volumes.push_back(c.volumes[i]);
    p.labels.push_back(c.labels[i]);
    p.models.push_back(c.models[i]);
  }
  const auto b = association_matrix(p);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(b(i, j), a(perm[i], perm[j]));
}

TEST(Property, SingleSymbolCollectionAssociatesFully) {
  std::mt19937_64 rng(8);
  const dims3 d{4, 3, 5};
  std::vector<std::vector<volume>> members(3, {volume(d, std::vector<double>(d.count(), 2.5))});
  auto c = make_collection(members, 8);
  ASSERT_EQ(c.table->size(), 1u);
  for (std::size_t i = 0; i < c.size(); ++i) c.models[i] = random_model(rng, 1, 3);
  EXPECT_TRUE(association_matrix(c) == square_matrix(3, 1.0));
}

TEST(Property, PredictionIsDeterministic) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto sv = symbolize(std::vector<quantized_volume>{quantize(random_volume(rng, {8, 7, 6}), 10)}).second;
    const auto m = random_model(rng, sv.symbol_count(), 5);
    EXPECT_TRUE(std::ranges::equal(transfer_predict(m, sv).ids(), transfer_predict(m, sv).ids()));
  }
}
