#include <gtest/gtest.h>

#include <random>

#include "gramufen/encoders/sage.hpp"
#include "gramufen/fusion.hpp"
#include "support/helpers.hpp"

using namespace gramufen;
using testing_support::from_mat;
using testing_support::max_abs_diff;
using testing_support::to_mat;
using testing_support::to_vec;

namespace {

Var<double> leaf(const oracle::Mat& m, bool grad = false) { return Var<double>(from_mat(m), grad); }

std::vector<int> random_labels(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = int(rng() % 2);
  return y;
}

}  // namespace

TEST(Pooling, MatchesOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<std::size_t> graph_of{0, 0, 0, 1, 2, 2};
    const auto nodes = oracle::random_mat(6, 5, rng);
    const auto out = global_mean_pool(leaf(nodes), std::span<const std::size_t>(graph_of), 3).value();
    EXPECT_LT(max_abs_diff(out, oracle::mean_pool(nodes, graph_of, 3)), 1e-12);
  }
}

TEST(ProjectionHead, MatchesOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    ProjectionHead<double> head(5, 4, rng);
    const auto x = oracle::random_mat(3, 5, rng);
    const auto out = project(head, leaf(x)).value();
    const auto ref = oracle::project(x, to_mat(head.first().weight.var.value()), to_vec(head.first().bias.var.value()),
                                     to_mat(head.second().weight.var.value()), to_vec(head.second().bias.var.value()));
    EXPECT_LT(max_abs_diff(out, ref), 1e-12);
  }
}

TEST(Similarity, MatchesOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t b = 1 + trial % 6, d = 2 + trial % 5;
    const auto zt = oracle::random_mat(b, d, rng), zi = oracle::random_mat(b, d, rng);
    const auto s = similarity(leaf(zt), leaf(zi));
    EXPECT_LT(max_abs_diff(s.p.value(), oracle::gram(zt, zi)), 1e-12);
    EXPECT_LT(max_abs_diff(s.e.value(), oracle::expected(zt, zi)), 1e-12);
    const auto ref = oracle::similarity_loss(zt, zi);
    EXPECT_NEAR(scalar(s.l_text), ref.l_text, 1e-9);
    EXPECT_NEAR(scalar(s.l_img), ref.l_img, 1e-9);
    EXPECT_NEAR(scalar(s.l_s), ref.l_s, 1e-9);
  }
}

TEST(Similarity, ExpectedRowsAreDistributions) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + trial % 8;
    const auto e = expected_matrix(leaf(oracle::random_mat(b, 4, rng, 3.0)), leaf(oracle::random_mat(b, 4, rng, 3.0))).value();
    for (std::size_t i = 0; i < b; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < b; ++j) {
        EXPECT_GE(e(i, j), 0.0);
        sum += e(i, j);
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Similarity, TextAndImageTermsAgree) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = similarity(leaf(oracle::random_mat(5, 3, rng)), leaf(oracle::random_mat(5, 3, rng)));
    EXPECT_NEAR(scalar(s.l_text), scalar(s.l_img), 1e-12);
  }
}

// Swapping modalities transposes P but leaves E alone, so the two orders
// differ by mean(P * (E^T - E)); zero exactly when E is symmetric.
TEST(Similarity, ModalitySwapDifferenceHasClosedForm) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto zt = oracle::random_mat(5, 3, rng), zi = oracle::random_mat(5, 3, rng);
    const auto p = oracle::gram(zt, zi), e = oracle::expected(zt, zi);
    double gap = 0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) gap += p[i][j] * (e[j][i] - e[i][j]);
    gap /= 25.0;
    const double forward = scalar(similarity(leaf(zt), leaf(zi)).l_s);
    const double swapped = scalar(similarity(leaf(zi), leaf(zt)).l_s);
    EXPECT_NEAR(forward - swapped, gap, 1e-9);
  }
}

TEST(Similarity, SwapInvariantWhenEmbeddingsCoincide) {
  std::mt19937_64 rng(5);
  oracle::Mat z(4, oracle::Vec(4, 0.0));
  for (std::size_t i = 0; i < 4; ++i) z[i][i] = 1.0 + 0.1 * double(i % 2);
  const auto zt = leaf(z), zi = leaf(z);
  EXPECT_NEAR(scalar(similarity(zt, zi).l_s), scalar(similarity(zi, zt).l_s), 1e-12);
  const auto e = expected_matrix(zt, zi).value();
  oracle::Mat orth{{1, 0}, {0, 1}};
  const auto eo = expected_matrix(leaf(orth), leaf(orth)).value();
  EXPECT_NEAR(eo(0, 0), std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-12);
  EXPECT_NEAR(eo(0, 1), eo(1, 0), 1e-12);
  EXPECT_EQ(e.rows(), 4u);
}

TEST(Similarity, ClosedFormCases) {
  const auto one = similarity(leaf(oracle::Mat{{0.0}}), leaf(oracle::Mat{{3.0}}));
  EXPECT_NEAR(scalar(one.l_text), std::log(2.0), 1e-12);
  EXPECT_NEAR(one.e.value()(0, 0), 1.0, 1e-15);
  const auto id = similarity_logits(leaf(oracle::Mat{{1, 0}, {0, 1}}), leaf(oracle::Mat{{1, 0}, {0, 1}})).value();
  EXPECT_EQ(id(0, 0), 1.0);
  EXPECT_EQ(id(0, 1), 0.0);
}

TEST(Similarity, LossIsNonNegativeAndFiniteForLargeScores) {
  std::mt19937_64 rng(5);
  const auto s = similarity(leaf(oracle::random_mat(4, 3, rng, 100.0)), leaf(oracle::random_mat(4, 3, rng, 100.0)));
  EXPECT_TRUE(std::isfinite(scalar(s.l_s)));
  EXPECT_GE(scalar(s.l_s), 0.0);
}

TEST(Similarity, RejectsMismatchedShapes) {
  const auto a = leaf(oracle::zeros(3, 4)), b = leaf(oracle::zeros(2, 4)), c = leaf(oracle::zeros(3, 5));
  for (const auto& other : {b, c}) {
    try {
      similarity(a, other);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
  }
}

TEST(Similarity, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  auto zt = make_param<double>("zt", normal_tensor<double>({4, 3}, 1.0, rng));
  auto zi = make_param<double>("zi", normal_tensor<double>({4, 3}, 1.0, rng));
  const auto r = testing_support::finite_difference_check({&zt, &zi}, [&] { return similarity(zt.var, zi.var).l_s; });
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Classifier, MatchesOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    Classifier<double> cls(6, 7, rng);
    const auto zt = oracle::random_mat(4, 3, rng), zi = oracle::random_mat(4, 3, rng);
    const auto z = classify(leaf(zt), leaf(zi), cls).value();
    const auto ref = oracle::classify(zt, zi, to_mat(cls.hidden().weight.var.value()), to_vec(cls.hidden().bias.var.value()),
                                      to_vec(cls.hidden_bias().var.value()), to_mat(cls.output().weight.var.value()));
    EXPECT_LT(max_abs_diff(z, ref), 1e-12);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(z(i, 0) + z(i, 1), 1.0, 1e-12);
  }
}

TEST(Classifier, RejectsWidthMismatch) {
  std::mt19937_64 rng(0);
  Classifier<double> cls(6, 4, rng);
  try {
    classify(leaf(oracle::zeros(2, 3)), leaf(oracle::zeros(2, 4)), cls);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
  EXPECT_THROW(classify(leaf(oracle::zeros(2, 3)), leaf(oracle::zeros(3, 3)), cls), Error);
}

TEST(ClassificationLoss, MatchesOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto z = oracle::random_mat(5, 2, rng);
    for (auto& row : z) {
      const double a = oracle::sigmoid(row[0]);
      row = {a, 1 - a};
    }
    const auto y = random_labels(5, rng);
    EXPECT_NEAR(scalar(classification_loss(leaf(z), y)), oracle::classification_loss(z, y), 1e-12);
  }
}

TEST(ClassificationLoss, InvalidInputs) {
  const auto z = leaf(oracle::Mat{{0.5, 0.5}, {0.5, 0.5}});
  try {
    classification_loss(z, std::vector<int>{0, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidLabel);
  }
  EXPECT_THROW(classification_loss(z, std::vector<int>{0}), Error);
}

TEST(ClassificationLoss, FakeIsColumnOne) {
  const auto confident_fake = leaf(oracle::Mat{{0.01, 0.99}});
  EXPECT_LT(scalar(classification_loss(confident_fake, std::vector<Label>{Label::Fake})),
            scalar(classification_loss(confident_fake, std::vector<Label>{Label::Real})));
}

TEST(TotalLoss, SumsTerms) {
  std::mt19937_64 rng(8);
  Classifier<double> cls(6, 5, rng);
  const auto zt = oracle::random_mat(3, 3, rng), zi = oracle::random_mat(3, 3, rng);
  const auto y = random_labels(3, rng);
  const auto lc = classification_loss(classify(leaf(zt), leaf(zi), cls), y);
  const auto ls = similarity(leaf(zt), leaf(zi)).l_s;
  EXPECT_NEAR(scalar(total_loss(lc, ls)), scalar(lc) + oracle::similarity_loss(zt, zi).l_s, 1e-12);
}

TEST(Fusion, EndToEndGradient) {
  std::mt19937_64 rng(9);
  ProjectionHead<double> ht(4, 3, rng), hi(5, 3, rng);
  Classifier<double> cls(6, 4, rng);
  ParamList<double> ps;
  ht.collect(ps, "ht.");
  hi.collect(ps, "hi.");
  cls.collect(ps, "cls.");
  const Var<double> xt(normal_tensor<double>({3, 4}, 1.0, rng)), xi(normal_tensor<double>({3, 5}, 1.0, rng));
  const std::vector<int> y{1, 0, 1};
  const auto r = testing_support::finite_difference_check(ps, [&] {
    auto zt = ht(xt), zi = hi(xi);
    return total_loss(classification_loss(classify(zt, zi, cls), y), similarity(zt, zi).l_s);
  });
  EXPECT_LT(r.max_rel_error, 1e-5) << r.worst;
}
