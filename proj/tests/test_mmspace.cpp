#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace rfnet;
using namespace rfnet::testing;

namespace {

FiniteMMSpace two_points(double gap, double m0 = 1.0, double m1 = 1.0) {
  FiniteMMSpace X;
  X.ids = {"o", "x"};
  X.metric = Eigen::MatrixXd{{0, gap}, {gap, 0}};
  X.weights = {m0, m1};
  return X;
}

FiniteMMSpace singleton(double m) {
  FiniteMMSpace X;
  X.ids = {"o"};
  X.metric = Eigen::MatrixXd::Zero(1, 1);
  X.weights = {m};
  return X;
}

/// max over A of p(A) - q(closed eps-neighbourhood of A), by enumeration.
double subset_deficit(const std::vector<double>& p, const std::vector<double>& q, const Eigen::MatrixXd& D, double eps) {
  double worst = 0.0;
  for (std::uint32_t A = 1; A < (1u << p.size()); ++A) {
    double pa = 0.0, qa = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if ((A >> i) & 1) pa += p[i];
    for (std::size_t j = 0; j < q.size(); ++j) {
      bool near = false;
      for (std::size_t i = 0; i < p.size() && !near; ++i)
        near = ((A >> i) & 1) && D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= eps;
      if (near) qa += q[j];
    }
    worst = std::max(worst, pa - qa);
  }
  return worst;
}

double prohorov_oracle(const std::vector<double>& p, const std::vector<double>& q, const Eigen::MatrixXd& D) {
  std::vector<double> radii{0.0};
  for (Eigen::Index i = 0; i < D.size(); ++i) radii.push_back(D.data()[i]);
  double best = 1e300;
  for (double r : radii) {
    const double d = std::max(subset_deficit(p, q, D, r), subset_deficit(q, p, D.transpose(), r));
    best = std::min(best, std::max(r, d));
  }
  return best;
}

}  // namespace

TEST(FromNetwork, Examples) {
  const auto X = from_network(two_point());
  EXPECT_TRUE(X.metric.isApprox(Eigen::MatrixXd{{0, 1}, {1, 0}}));
  const auto T = from_network(triangle());
  EXPECT_NEAR(T.distance(0, 2), 2.0 / 3.0, 1e-14);
  const auto F = from_network(figure1_family(3, Figure1Variant::linear));
  for (std::size_t a = 4; a < 7; ++a) EXPECT_NEAR(F.distance(0, a), 3.0, 1e-12);
  EXPECT_NEAR(F.distance(4, 5), 6.0, 1e-12);
  EXPECT_NEAR(F.distance(4, 3), 6.0, 1e-12);
}

TEST(RestrictBall, Examples) {
  const auto X = from_network(unit_path(10));
  EXPECT_EQ(restrict_ball(X, 20.0).size(), X.size());
  EXPECT_EQ(restrict_ball(X, 0.0).size(), 1u);
  const auto B = restrict_ball(X, 2.5);
  ASSERT_EQ(B.size(), 3u);
  EXPECT_EQ(B.ids, (std::vector<std::string>{"0", "1", "2"}));
  EXPECT_EQ(ball_boundary_ties(X, 2.0), std::vector<std::string>{"2"});
  EXPECT_THROW(restrict_ball(X, -1.0), InvalidArgument);
}

TEST(Surrogate, IdentityIsZero) {
  StreamRng rng(5, 1);
  const auto X = random_space(5, rng);
  Correspondence C;
  for (std::size_t i = 0; i < X.size(); ++i) C.emplace_back(i, i);
  EXPECT_EQ(ghp_upper(X, X, C), 0.0);
  EXPECT_EQ(ghp_search(X, X).value, 0.0);
}

TEST(Surrogate, TwoPointGap) {
  const double eps = 0.3;
  const auto X = two_points(1.0), Y = two_points(1.0 + eps);
  const Correspondence C{{0, 0}, {1, 1}};
  EXPECT_NEAR(ghp_upper(X, Y, C), eps / 2, 1e-14);
  const auto r = ghp_search(X, Y);
  EXPECT_TRUE(r.exact);
  EXPECT_LE(r.value, eps + 1e-14);
  EXPECT_NEAR(r.value, brute_force_ghp(X, Y), 1e-14);
}

TEST(Surrogate, SingletonMasses) {
  const auto r = ghp_search(singleton(2.0), singleton(3.5));
  EXPECT_NEAR(r.value, 1.5, 1e-14);
}

TEST(Surrogate, CorrespondenceValidation) {
  const auto X = two_points(1.0), Y = two_points(2.0);
  EXPECT_THROW(ghp_upper(X, Y, {{0, 0}}), InvalidArgument);          // not covering
  EXPECT_THROW(ghp_upper(X, Y, {{0, 1}, {1, 0}}), InvalidArgument);  // root pair missing
  EXPECT_THROW(ghp_upper(X, Y, {{0, 0}, {1, 5}}), InvalidArgument);
}

TEST(Surrogate, ExhaustiveMatchesBruteForce) {
  StreamRng rng(42, 3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t nx = 1 + rng.below(4), ny = 1 + rng.below(std::min<std::size_t>(4, 12 / nx));
    const auto X = random_space(nx, rng), Y = random_space(ny, rng);
    const auto r = ghp_search(X, Y);
    ASSERT_TRUE(r.exact);
    EXPECT_NEAR(r.value, brute_force_ghp(X, Y), 1e-12) << nx << "x" << ny;
    EXPECT_NEAR(ghp_upper(X, Y, r.best), r.value, 1e-12);
    EXPECT_NEAR(surrogate_value(X, Y, r.best), r.value, 1e-12);
  }
}

TEST(Surrogate, SymmetricAndRelabelInvariant) {
  StreamRng rng(8, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto X = random_space(2 + rng.below(4), rng), Y = random_space(2 + rng.below(4), rng);
    EXPECT_EQ(ghp_search(X, Y).value, ghp_search(Y, X).value);
    std::vector<std::size_t> perm(X.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::reverse(perm.begin(), perm.end());
    EXPECT_NEAR(ghp_search(X, permuted(X, perm)).value, 0.0, 1e-12);
  }
}

TEST(Surrogate, HeuristicAboveCap) {
  StreamRng rng(9, 3);
  const auto X = random_space(9, rng), Y = random_space(8, rng);
  const auto small = ghp_search(X, Y, 5, 1), big = ghp_search(X, Y, 400, 1);
  EXPECT_FALSE(big.exact);
  EXPECT_LE(big.value, small.value);
  EXPECT_NEAR(ghp_upper(X, Y, big.best), big.value, 1e-12);
  EXPECT_EQ(ghp_search(X, Y, 400, 1).value, big.value);
  std::vector<std::size_t> perm(X.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::rotate(perm.begin(), perm.begin() + 3, perm.end());
  EXPECT_NEAR(ghp_search(X, permuted(X, perm), 50).value, 0.0, 1e-12);
  EXPECT_THROW(ghp_search(X, Y, 0), InvalidArgument);
}

TEST(Prohorov, PointMassesAndOracle) {
  const Eigen::MatrixXd D{{0.4}};
  const std::vector<double> one{1.0};
  EXPECT_NEAR(prohorov_distance(one, one, D), 0.4, 1e-14);
  const Eigen::MatrixXd far{{5.0}};
  EXPECT_NEAR(prohorov_distance(one, one, far), 1.0, 1e-14);
  StreamRng rng(11, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t a = 1 + rng.below(4), b = 1 + rng.below(4);
    std::vector<double> p(a), q(b);
    for (auto& v : p) v = rng.uniform() + 0.05;
    for (auto& v : q) v = rng.uniform() + 0.05;
    const double sp = std::accumulate(p.begin(), p.end(), 0.0), sq = std::accumulate(q.begin(), q.end(), 0.0);
    for (auto& v : p) v /= sp;
    for (auto& v : q) v /= sq;
    Eigen::MatrixXd H(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = rng.uniform() * 1.5;
    EXPECT_NEAR(prohorov_distance(p, q, H), prohorov_oracle(p, q, H), 1e-12);
  }
}

TEST(Spatial, IdenticalAndShifted) {
  auto X = two_points(1.0);
  X.embedding = Eigen::MatrixXd{{0.0, 0.0}, {1.0, 0.0}};
  const Correspondence C{{0, 0}, {1, 1}};
  const auto z = spatial_discrepancy(X, X, C);
  EXPECT_EQ(z.metric_part, 0.0);
  EXPECT_EQ(z.embedding_part, 0.0);
  auto Y = X;
  Y.embedding->col(1).array() += 0.05;
  const auto s = spatial_discrepancy(X, Y, C);
  EXPECT_EQ(s.metric_part, 0.0);
  EXPECT_NEAR(s.embedding_part, 0.05, 1e-12);
  EXPECT_THROW(spatial_discrepancy(X, two_points(1.0), C), InvalidArgument);
}

TEST(Moments, Examples) {
  const auto X = two_points(1.0);
  auto one = [](std::span<const double>) { return 1.0; };
  EXPECT_NEAR(gromov_weak_moment(X, 3, one, 100, 1).estimate.value, 1.0, 1e-14);
  auto d01 = [](std::span<const double> d) { return d[0]; };
  const auto m = gromov_weak_moment(X, 1, d01, 100, 1);
  EXPECT_TRUE(m.exact);
  EXPECT_NEAR(m.estimate.value, 0.5, 1e-14);
}

TEST(MmspaceIo, RoundTripAndErrors) {
  auto X = from_network(random_network(5, 3));
  X.embedding = Eigen::MatrixXd::Random(5, 2);
  std::stringstream ss;
  write_mmspace(ss, X);
  const auto Y = read_mmspace(ss);
  EXPECT_EQ(Y.ids, X.ids);
  EXPECT_EQ(Y.root, X.root);
  EXPECT_TRUE(Y.metric == X.metric);
  EXPECT_TRUE(*Y.embedding == *X.embedding);

  const char* bad[] = {
      "mmspace v1\npoint a 1\npoint b 1\nroot a\n",                             // missing dist
      "mmspace v1\npoint a 1\npoint b 1\ndist a b 1\n",                         // missing root
      "mmspace v1\npoint a 1\npoint b 1 3\ndist a b 1\nroot a\n",               // mixed embedding dims
      "mmspace v1\npoint a 1\npoint b 1\npoint c 1\ndist a b 1\ndist a c 1\ndist b c 5\nroot a\n",  // triangle
      "mmspace v1\npoint a -1\npoint b 1\ndist a b 1\nroot a\n",
      "nope\n",
  };
  for (const char* text : bad) {
    std::istringstream is(text);
    EXPECT_THROW(read_mmspace(is), ParseError) << text;
  }
}

TEST(Growth, LinearPlateausSqrtGrows) {
  const std::vector<double> radii{1, 2, 4, 8, 16, 32, 64};
  std::vector<Network> lin, sq;
  for (std::size_t n : {100, 1000}) {
    lin.push_back(figure1_family(n, Figure1Variant::linear));
    sq.push_back(figure1_family(n, Figure1Variant::sqrt));
  }
  std::vector<std::pair<std::string, const Network*>> a, b;
  for (std::size_t i = 0; i < 2; ++i) {
    a.emplace_back(std::to_string(i), &lin[i]);
    b.emplace_back(std::to_string(i), &sq[i]);
  }
  const auto pl = resistance_growth_profile(a, radii), ps = resistance_growth_profile(b, radii);
  EXPECT_TRUE(pl.growth_fails);
  EXPECT_FALSE(ps.growth_fails);
  EXPECT_GT(ps.upper_slope, 0.4);
  std::ostringstream os;
  write_profile_csv(os, pl);
  EXPECT_EQ(os.str().substr(0, 10), "n,r,value\n");
}
