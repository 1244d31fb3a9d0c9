#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "oracles.hpp"
#include "pouf/errors.hpp"
#include "pouf/eval_report.hpp"
#include "pouf/model.hpp"

using namespace pouf;

namespace {

RowMatrixXd unit_rows(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n;
  RowMatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return row_normalized(m);
}

}  // namespace

TEST_CASE("evaluate examples") {
  RowMatrixXd onehot = RowMatrixXd::Zero(4, 3);
  const std::vector<int> labels{0, 2, 1, 2};
  for (int i = 0; i < 4; ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  const EvalResult r = evaluate_predictions(onehot, labels);
  CHECK(r.accuracy == 1.0);
  CHECK(r.confusion(0, 0) == 1);
  CHECK(r.confusion(1, 1) == 1);
  CHECK(r.confusion(2, 2) == 2);
  CHECK(r.confusion.sum() == 4);

  const std::vector<int> zeros{0, 0, 0};
  CHECK(evaluate_predictions(RowMatrixXd::Constant(3, 2, 0.5), zeros).accuracy == 1.0);

  RowMatrixXd p(4, 2);
  p << 0.9, 0.1, 0.3, 0.7, 0.6, 0.4, 0.2, 0.8;
  const std::vector<int> y{0, 1, 1, 1};
  const EvalResult c = evaluate_predictions(p, y);
  CHECK(c.accuracy == 0.75);
  CHECK(c.confusion(0, 0) == 1);
  CHECK(c.confusion(0, 1) == 0);
  CHECK(c.confusion(1, 0) == 1);
  CHECK(c.confusion(1, 1) == 2);
  CHECK(c.per_class_accuracy[0] == 1.0);
  CHECK(c.per_class_accuracy[1] == doctest::Approx(2.0 / 3.0));

  const std::vector<int> short_labels{0};
  CHECK_THROWS_AS(evaluate_predictions(p, short_labels), ShapeError);
  const std::vector<int> unlabeled{0, -1, 1, 1};
  CHECK_THROWS_AS(evaluate_predictions(p, unlabeled), ValidationError);
}

TEST_CASE("accuracy equals the confusion trace ratio and ignores sample order") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const RowMatrixXd p = unit_rows(rng, 30, 4).cwiseAbs();
    std::vector<int> y(30);
    for (int& v : y) v = cls(rng);
    const EvalResult r = evaluate_predictions(p, y);
    CHECK(r.accuracy == doctest::Approx(static_cast<double>(r.confusion.trace()) /
                                        static_cast<double>(r.confusion.sum())));
    CHECK(r.confusion.minCoeff() >= 0);

    std::vector<int> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    RowMatrixXd q(30, 4);
    std::vector<int> z(30);
    for (int i = 0; i < 30; ++i) {
      q.row(i) = p.row(perm[static_cast<std::size_t>(i)]);
      z[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    const EvalResult s = evaluate_predictions(q, z);
    CHECK(s.accuracy == r.accuracy);
    CHECK(s.confusion == r.confusion);
  }
}

TEST_CASE("absent classes have undefined per-class accuracy") {
  RowMatrixXd p(2, 3);
  p << 1, 0, 0, 0, 1, 0;
  const std::vector<int> y{0, 1};
  const EvalResult r = evaluate_predictions(p, y);
  CHECK(std::isnan(r.per_class_accuracy[2]));
  const auto j = nlohmann::json::parse(metrics_json(r));
  CHECK(j["per_class_accuracy"][2].is_null());
  CHECK(j["accuracy"] == 1.0);
  CHECK(j["confusion"][1][1] == 1);
}

TEST_CASE("mean_correct_cosine") {
  RowMatrixXd f(2, 2), w(2, 2);
  f << 1, 0, 0.6, 0.8;
  w << 1, 0, 0, 1;
  const std::vector<int> y{0, 1};
  CHECK(mean_correct_cosine(f, w, y) == doctest::Approx((1.0 + 0.8) / 2));
}

TEST_CASE("cosine histogram examples") {
  RowMatrixXd w(1, 2);
  w << 1, 0;
  const std::vector<int> y2{0, 0};
  const Histogram top = cosine_histogram(w.replicate(2, 1), w, y2, 4);
  CHECK(top.counts == std::vector<std::size_t>{0, 0, 0, 2});

  RowMatrixXd f(2, 2);
  f << 0, 1, 1, 0;
  const Histogram h = cosine_histogram(f, w, y2, 2);
  CHECK(h.edges == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK(h.counts == std::vector<std::size_t>{1, 1});

  RowMatrixXd g(1, 2);
  g << -1, 0;
  const std::vector<int> y1{0};
  CHECK(cosine_histogram(g, w, y1, 3).counts == std::vector<std::size_t>{1, 0, 0});

  CHECK_THROWS_AS(cosine_histogram(f, w, y2, 0), ValidationError);
  const std::vector<int> bad{0, 1};
  CHECK_THROWS_AS(cosine_histogram(f, w, bad, 2), ValidationError);
}

TEST_CASE("histogram conserves mass with linear edges") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 2);
  for (std::size_t bins : {1u, 2u, 7u, 20u}) {
    const RowMatrixXd f = unit_rows(rng, 57, 4);
    const RowMatrixXd w = unit_rows(rng, 3, 4);
    std::vector<int> y(57);
    for (int& v : y) v = cls(rng);
    const Histogram h = cosine_histogram(f, w, y, bins);
    CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == 57);
    REQUIRE(h.edges.size() == bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
      CHECK(h.edges[i] == doctest::Approx(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(bins)));
    }
  }
}

TEST_CASE("knn examples") {
  RowMatrixXd w(1, 2);
  w << 0, 1;
  RowMatrixXd f(3, 2);
  f << 1, 0, 0, 1, -1, 0;
  CHECK(knn_of_prototypes(f, w, 1)(0, 0) == 1);

  RowMatrixXd orth(3, 3);
  orth << 1, 0, 0, 0, 0, 1, 0, 1, 0;
  RowMatrixXd proto(1, 3);
  proto << 0, 0, 1;
  CHECK(knn_of_prototypes(orth, proto, 3)(0, 0) == 1);
  CHECK(knn_of_prototypes(orth, proto, 3)(0, 1) == 0);  // tie at 0 goes to the lower index

  CHECK_THROWS_AS(knn_of_prototypes(f, w, 4), ValidationError);
}

TEST_CASE("knn matches a full sort on a crafted 5x2 instance and on random ones") {
  RowMatrixXd f(5, 2);
  f << 1, 0, 0.8, 0.6, 0, 1, -0.6, 0.8, 0.6, -0.8;
  RowMatrixXd w(2, 2);
  w << 1, 0, 0, 1;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 21; ++trial) {
    const RowMatrixXd ff = trial == 0 ? f : unit_rows(rng, 9, 3);
    const RowMatrixXd ww = trial == 0 ? w : unit_rows(rng, 4, 3);
    const std::size_t k = trial == 0 ? 5 : 4;
    const RowMatrix<long> got = knn_of_prototypes(ff, ww, k);
    for (Eigen::Index p = 0; p < ww.rows(); ++p) {
      std::vector<double> score(static_cast<std::size_t>(ff.rows()));
      for (Eigen::Index i = 0; i < ff.rows(); ++i) score[static_cast<std::size_t>(i)] = ff.row(i).dot(ww.row(p));
      const auto order = oracle::rank_descending(score);
      for (std::size_t r = 0; r < k; ++r) CHECK(got(p, static_cast<Eigen::Index>(r)) == static_cast<long>(order[r]));
    }
  }
}

TEST_CASE("pca projection and csv layouts") {
  RowMatrixXd pts(4, 3);
  pts << 2, 0, 0, -2, 0, 0, 0, 1, 0, 0, -1, 0;
  const RowMatrixXd xy = pca_2d(pts);
  CHECK(xy.rows() == 4);
  CHECK(xy.cols() == 2);
  CHECK(std::abs(xy(0, 0)) == doctest::Approx(2.0));
  CHECK(std::abs(xy(2, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(xy(2, 0)) <= 1e-12);

  const std::vector<std::size_t> ids{10, 11, 12, 13};
  const std::vector<int> labels{0, 1, -1, 2};
  const std::string csv = pca_csv(xy, ids, labels);
  CHECK(csv.rfind("id,x,y,label\n10,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  Histogram h{{-1, 0, 1}, {3, 4}};
  CHECK(histogram_csv(h) == "edge,count\n-1,3\n0,4\n");

  RowMatrixXd f(2, 2), w(1, 2);
  f << 1, 0, 0, 1;
  w << 1, 0;
  const std::vector<std::size_t> fid{7, 8};
  const std::string k = knn_csv(knn_of_prototypes(f, w, 2), f, w, fid);
  CHECK(k.rfind("prototype_id,rank,feature_id,cosine\n0,0,7,1", 0) == 0);
}
