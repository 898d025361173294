// Copyright 2026 The AUSDS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ausds.hpp"
#include "fixtures.hpp"

using namespace ausds;

namespace {

struct Cloud {
  std::vector<SampleId> ids;
  std::vector<float> v;
  std::size_t dim;
};

Cloud make_cloud(std::size_t n, std::size_t dim, std::uint64_t seed, bool clustered = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  Cloud c{{}, {}, dim};
  std::vector<std::vector<float>> centers(8, std::vector<float>(dim));
  for (auto& ctr : centers)
    for (auto& x : ctr) x = 5.0f * nd(rng);
  for (std::size_t i = 0; i < n; ++i) {
    c.ids.push_back(static_cast<SampleId>(i * 3 + 1));  // sparse ids
    const auto& ctr = centers[i % 8];
    for (std::size_t k = 0; k < dim; ++k) c.v.push_back((clustered ? ctr[k] : 0.0f) + nd(rng));
  }
  return c;
}

// Independent O(N) scan: (distance^2, id) ascending, first k.
std::vector<std::pair<double, SampleId>> scan(const Cloud& c, const std::vector<bool>& removed, const Vector& q,
                                              std::size_t k) {
  std::vector<std::pair<double, SampleId>> all;
  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    if (removed[i]) continue;
    double d2 = 0.0;
    for (std::size_t j = 0; j < c.dim; ++j) {
      const double t = static_cast<double>(c.v[i * c.dim + j]) - q[j];
      d2 += t * t;
    }
    all.emplace_back(d2, c.ids[i]);
  }
  std::sort(all.begin(), all.end());
  if (all.size() > k) all.resize(k);
  return all;
}

void expect_same(const std::vector<Neighbor>& got, const std::vector<std::pair<double, SampleId>>& want) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].id, want[i].second) << "rank " << i;
    EXPECT_EQ(got[i].distance2, want[i].first) << "rank " << i;
  }
}

Vector random_query(std::size_t dim, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector q(dim);
  for (auto& x : q) x = nd(rng);
  return q;
}

}  // namespace

TEST(ExactIndex, AgreesWithScan) {
  for (auto kind : {IndexKind::ball_tree, IndexKind::flat}) {
    for (bool clustered : {false, true}) {
      const auto c = make_cloud(3000, 8, 1 + clustered);
      ExactIndex idx(c.ids, c.v, c.dim, kind, 16);
      std::vector<bool> removed(c.ids.size(), false);
      std::mt19937_64 rng(9);
      for (int i = 0; i < 200; ++i) {
        const auto q = random_query(8, rng, clustered ? 5.0 : 1.0);
        const std::size_t k = 1 + rng() % 10;
        expect_same(idx.search(q, k), scan(c, removed, q, k));
      }
    }
  }
}

TEST(ExactIndex, TiesBrokenById) {
  // four points at the same distance from the origin
  std::vector<SampleId> ids{9, 4, 7, 2};
  std::vector<float> v{1, 0, 0, 1, -1, 0, 0, -1};
  for (auto kind : {IndexKind::ball_tree, IndexKind::flat}) {
    ExactIndex idx(ids, v, 2, kind, 1);
    const auto r = idx.search(Vector{0, 0}, 3);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0].id, 2u);
    EXPECT_EQ(r[1].id, 4u);
    EXPECT_EQ(r[2].id, 7u);
  }
}

TEST(ExactIndex, DuplicatePoints) {
  std::vector<SampleId> ids;
  std::vector<float> v;
  for (SampleId i = 0; i < 100; ++i) {
    ids.push_back(99 - i);
    v.push_back(1.0f);
    v.push_back(2.0f);
  }
  ExactIndex idx(ids, v, 2, IndexKind::ball_tree, 4);
  const auto r = idx.search(Vector{1, 2}, 5);
  ASSERT_EQ(r.size(), 5u);
  for (SampleId i = 0; i < 5; ++i) EXPECT_EQ(r[i].id, i);
}

TEST(ExactIndex, SelfMatchAndOversizedK) {
  const auto c = make_cloud(50, 3, 4);
  ExactIndex idx(c.ids, c.v, 3);
  const Vector q{c.v[30], c.v[31], c.v[32]};
  const auto r = idx.search(q, 1);
  EXPECT_EQ(r[0].id, c.ids[10]);
  EXPECT_EQ(r[0].distance2, 0.0);
  const auto all = idx.search(q, 500);
  EXPECT_EQ(all.size(), 50u);
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
}

TEST(ExactIndex, RemovalsMatchScan) {
  const auto c = make_cloud(2000, 6, 5, true);
  ExactIndex idx(c.ids, c.v, c.dim, IndexKind::ball_tree, 8);
  std::vector<bool> removed(c.ids.size(), false);
  std::mt19937_64 rng(10);
  std::size_t alive = c.ids.size();
  while (alive > 0) {
    for (int r = 0; r < 97 && alive > 0; ++r) {
      const auto i = rng() % c.ids.size();
      EXPECT_EQ(idx.remove(c.ids[i]), !removed[i]);
      if (!removed[i]) --alive;
      removed[i] = true;
    }
    EXPECT_EQ(idx.size(), alive);
    for (int qn = 0; qn < 10; ++qn) {
      const auto q = random_query(6, rng, 5.0);
      expect_same(idx.search(q, 3), scan(c, removed, q, 3));
    }
  }
  EXPECT_TRUE(idx.search(Vector(6, 0.0), 3).empty());
}

TEST(ExactIndex, Errors) {
  const auto c = make_cloud(10, 3, 4);
  ExactIndex idx(c.ids, c.v, 3);
  EXPECT_THROW(idx.search(Vector{1, 2}, 1), ShapeError);
  EXPECT_THROW(idx.search(Vector{1, 2, 3}, 0), ConfigError);
  EXPECT_THROW(ExactIndex({1, 1}, {0, 0, 1, 1}, 2), InvariantError);
  EXPECT_THROW(ExactIndex({1}, {0, 0, 1}, 2), ShapeError);
  EXPECT_THROW(idx.vector_of(0), LookupError);
}

TEST(ExactIndex, LowRankDataIsSublinear) {
  // 20k points on a 3-dim subspace of R^32
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<Vector> basis(3, Vector(32));
  for (auto& b : basis)
    for (auto& x : b) x = nd(rng);
  std::vector<SampleId> ids;
  std::vector<float> v;
  for (SampleId i = 0; i < 20000; ++i) {
    ids.push_back(i);
    const double a = nd(rng), b = nd(rng), e = nd(rng);
    for (std::size_t k = 0; k < 32; ++k) v.push_back(static_cast<float>(a * basis[0][k] + b * basis[1][k] + e * basis[2][k]));
  }
  ExactIndex idx(ids, v, 32);
  std::size_t evals = 0;
  for (int i = 0; i < 50; ++i) {
    const auto p = idx.vector_of(static_cast<SampleId>(rng() % 20000));
    Vector q(p.begin(), p.end());
    q[0] += 0.01;
    idx.search(q, 1, &evals);
  }
  EXPECT_LT(evals / 50, 2000u);
}

namespace {

struct MapperFixture {
  Dataset d = ausds_test::random_dataset(1000, 5, 2, 77);
  EncoderStack stack{d.train.store};
  std::vector<SampleId> ids() const {
    std::vector<SampleId> out(1000);
    std::iota(out.begin(), out.end(), 0u);
    return out;
  }
};

}  // namespace

TEST(Mapper, BijectionOnBuild) {
  MapperFixture f;
  const auto m = LatentMapper::build(f.stack, f.ids());
  EXPECT_EQ(m.size(), 1000u);
  for (SampleId id = 0; id < 1000; ++id) EXPECT_EQ(m.inverse(m.forward(id)), id);
  const std::vector<float> nowhere(5, 123.0f);
  EXPECT_FALSE(m.inverse(nowhere).has_value());
}

TEST(Mapper, StaleAfterFineTune) {
  MapperFixture f;
  const auto m = LatentMapper::build(f.stack, f.ids());
  auto dec = DecoderModel::make(Architecture::linear, 5, 2);
  std::vector<LabeledSample> lab{{0, f.d.train.gold[0]}, {1, f.d.train.gold[1]}};
  fine_tune(f.stack, dec, lab, 2, {});
  EXPECT_TRUE(m.is_stale(f.stack));
  const std::vector<Vector> q{Vector(5, 0.0)};
  EXPECT_THROW(m.query(q, 1, f.stack.version()), StalenessError);
  const auto fresh = LatentMapper::build(f.stack, f.ids());
  EXPECT_NO_THROW(fresh.query(q, 1, f.stack.version()));
}

TEST(Mapper, BuildDeterministic) {
  MapperFixture f;
  const auto a = LatentMapper::build(f.stack, f.ids());
  const auto b = LatentMapper::build(f.stack, f.ids());
  EXPECT_EQ(a.ids(), b.ids());
  for (SampleId id = 0; id < 1000; ++id) {
    const auto x = a.forward(id), y = b.forward(id);
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }
}

TEST(Mapper, RemoveSemantics) {
  MapperFixture f;
  auto m = LatentMapper::build(f.stack, f.ids());
  EXPECT_EQ(m.remove({}), 0u);
  EXPECT_EQ(m.size(), 1000u);

  const auto v = m.forward(17);
  const Vector q(v.begin(), v.end());
  const std::vector<SampleId> one{17};
  EXPECT_EQ(m.remove(one), 1u);
  EXPECT_EQ(m.remove(one), 0u);  // absent: warned and skipped
  const std::vector<Vector> qs{q};
  const auto r = m.query(qs, 1, f.stack.version());
  ASSERT_EQ(r[0].size(), 1u);
  EXPECT_NE(r[0][0].id, 17u);
  // brute-force scan without 17
  double best = 1e300;
  SampleId best_id = 0;
  for (SampleId id = 0; id < 1000; ++id) {
    if (id == 17) continue;
    const double d2 = squared_distance(m.forward(id), q);
    if (d2 < best) {
      best = d2;
      best_id = id;
    }
  }
  EXPECT_EQ(r[0][0].id, best_id);
  EXPECT_FALSE(m.inverse(v).has_value());

  EXPECT_EQ(m.remove(f.ids()), 999u);
  EXPECT_TRUE(m.query(qs, 3, f.stack.version())[0].empty());
}

TEST(Mapper, DuplicateVectorsSmallestIdWins) {
  const auto d = ausds_test::dense_dataset({{1, 1}, {2, 2}, {1, 1}, {1, 1}}, {0, 1, 0, 1}, 2);
  EncoderStack s(d.train.store);
  auto m = LatentMapper::build(s, std::vector<SampleId>{3, 2, 1, 0});
  const std::vector<float> x{1, 1};
  EXPECT_EQ(m.inverse(x), 0u);
  m.remove(std::vector<SampleId>{0});
  EXPECT_EQ(m.inverse(x), 2u);
}

TEST(Mapper, KnnAgreesWithScanThroughAdapter) {
  MapperFixture f;
  auto a = Matrix::identity(5);
  a(0, 1) = 0.7;
  a(3, 3) = -2.0;
  f.stack.set_adapter(a, Vector{0.1, 0, 0, 0, -1});
  const auto m = LatentMapper::build(f.stack, f.ids());
  std::mt19937_64 rng(2);
  std::vector<Vector> qs;
  for (int i = 0; i < 100; ++i) qs.push_back(random_query(5, rng, 1.5));
  const auto res = m.query(qs, 4, f.stack.version());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    std::vector<std::pair<double, SampleId>> all;
    for (SampleId id = 0; id < 1000; ++id) {
      const auto z = f.stack.encode(id).values;
      double d2 = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        const double t = static_cast<double>(static_cast<float>(z[c])) - qs[i][c];
        d2 += t * t;
      }
      all.emplace_back(d2, id);
    }
    std::sort(all.begin(), all.end());
    all.resize(4);
    expect_same(res[i], all);
  }
}
