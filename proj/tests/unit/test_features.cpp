// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>

#include "doctest.h"
#include "skillassess/error.hpp"
#include "skillassess/features.hpp"
#include "skillassess/synthetic.hpp"
#include "test_util.hpp"

using namespace skillassess;
using testing::make_sample;

namespace {

ClipSample clip(std::vector<std::string> views, double start = 2.0, double end = 10.0) {
  auto s = make_sample("s1", "vid", "soccer", "dribbling");
  s.views = std::move(views);
  s.window_start_s = start;
  s.window_end_s = end;
  return s;
}

std::unique_ptr<SyntheticEncoder> encoder(double signal, std::size_t dim = 16) {
  return synthetic_encoder(7, signal, {{"vid", 6.0, {"balance"}, Proficiency::kNovice}}, dim);
}

// Solves (A + lambda I) x = b by Gaussian elimination with partial pivoting.
std::vector<double> solve(Matrix a, std::vector<double> b, double lambda) {
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i) a(i, i) += lambda;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
    }
    for (std::size_t k = 0; k < n; ++k) std::swap(a(c, k), a(p, k));
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (std::size_t k = c; k < n; ++k) a(r, k) -= f * a(c, k);
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a(i, k) * x[k];
    x[i] = s / a(i, i);
  }
  return x;
}

}  // namespace

TEST_CASE("frame count rounds window length up") {
  CHECK(frame_count(0, 8) == 8);
  CHECK(frame_count(0, 7.5) == 8);
  CHECK(frame_count(3, 3) == 0);
  const auto anchors = frame_anchors(0, 7.5);
  CHECK(anchors.size() == 8);
  CHECK(anchors.back() == doctest::Approx(6.5));
}

TEST_CASE("encode_clip shapes follow window and views") {
  const auto enc = encoder(1.0);
  auto seq = encode_clip(clip({"ego"}), *enc);
  CHECK(seq.frames.rows() == 8);
  CHECK(seq.frames.cols() == 16);
  seq = encode_clip(clip({"ego", "exo1", "exo2", "exo3", "exo4"}), *enc);
  CHECK(seq.frames.rows() == 8);
  CHECK(seq.frames.cols() == 80);
  CHECK(seq.view_layout.size() == 5);
  CHECK(seq.frames.all_finite());
}

TEST_CASE("encoding is deterministic and view blocks permute with views") {
  const auto enc = encoder(1.0, 4);
  const auto a = encode_clip(clip({"ego", "exo"}), *enc);
  CHECK(encode_clip(clip({"ego", "exo"}), *enc) == a);
  const auto b = encode_clip(clip({"exo", "ego"}), *enc);
  for (std::size_t r = 0; r < a.frames.rows(); ++r) {
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(a.frames(r, k) == b.frames(r, 4 + k));
      CHECK(a.frames(r, 4 + k) == b.frames(r, k));
    }
  }
  CHECK(encoder(1.0)->backend_id() == encoder(1.0)->backend_id());
  CHECK(encoder(1.0)->backend_id() != encoder(0.5)->backend_id());
}

TEST_CASE("zero signal strength ignores planted attributes") {
  const auto quiet = encoder(0.0);
  const auto other = synthetic_encoder(7, 0.0, {{"vid", 6.0, {"timing"}, {}}}, 16);
  CHECK(encode_clip(clip({"ego"}), *quiet) == encode_clip(clip({"ego"}), *other));
  CHECK(encode_clip(clip({"ego"}), *encoder(1.0)) != encode_clip(clip({"ego"}), *quiet));
  CHECK_THROWS_AS(synthetic_encoder(1, 1.5, {}), ArgumentError);
}

TEST_CASE("planted attributes are linearly recoverable from pooled features") {
  auto spec = make_overlap_spec(1, 1, 200, 0.0, 21);
  spec.min_attributes = 1;
  spec.max_attributes = 1;
  spec.events_per_video = 1;
  const auto corpus = gen_synthetic_corpus(spec);
  SyntheticEncoder enc(corpus.encoder, corpus.events);
  std::map<std::string, std::string> planted;
  for (const auto& a : corpus.ledger) planted[a.record_id] = *a.incorrect_attributes.begin();
  std::vector<std::string> labels;
  std::vector<std::vector<double>> x;
  std::map<std::string, std::size_t> classes;
  for (const auto& r : corpus.records) {
    ClipSample s = make_sample("clip:" + r.record_id, r.video_id, r.sport, r.skill);
    s.views = r.views;
    s.window_start_s = std::max(0.0, r.timestamp_s - 4);
    s.window_end_s = r.timestamp_s + 4;
    auto pooled = mean_rows(encode_clip(s, enc).frames);
    pooled.push_back(1.0);
    x.push_back(pooled);
    const auto& a = planted.at(r.record_id);
    labels.push_back(a);
    classes.emplace(a, classes.size());
  }
  REQUIRE(x.size() == 200);
  REQUIRE(classes.size() >= 2);
  const std::size_t d = x[0].size(), c = classes.size();
  Matrix xtx(d, d);
  Matrix xty(d, c);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = 0; q < d; ++q) xtx(p, q) += x[i][p] * x[i][q];
      xty(p, classes.at(labels[i])) += x[i][p];
    }
  }
  std::vector<std::vector<double>> w(c);
  for (std::size_t k = 0; k < c; ++k) {
    std::vector<double> col(d);
    for (std::size_t p = 0; p < d; ++p) col[p] = xty(p, k);
    w[k] = solve(xtx, col, 1e-6);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t best = 0;
    double best_v = -1e300;
    for (std::size_t k = 0; k < c; ++k) {
      double v = 0.0;
      for (std::size_t p = 0; p < d; ++p) v += w[k][p] * x[i][p];
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    correct += best == classes.at(labels[i]);
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(x.size()) >= 0.99);
}

TEST_CASE("feature cache round trips float32 blobs and detects corruption") {
  testing::TempDir dir("cache");
  FeatureCache cache(dir.path());
  const auto enc = encoder(1.0);
  const auto seq = encode_clip(clip({"ego", "exo"}), *enc);
  const auto blob = cache.put(seq, enc->backend_id());
  const auto got = cache.get(seq.sample_id, enc->backend_id());
  REQUIRE(got.has_value());
  CHECK(got->view_layout == seq.view_layout);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    CHECK(got->frames.data()[i] == static_cast<double>(static_cast<float>(seq.frames.data()[i])));
  }
  CHECK_FALSE(cache.get(seq.sample_id, "other-backend").has_value());
  CHECK(std::filesystem::exists(cache.manifest_path()));

  Matrix m(1, 2);
  m(0, 0) = 1.0;
  m(0, 1) = -2.0;
  const auto bytes = FeatureCache::encode_blob(m);
  CHECK(bytes == std::string("\x00\x00\x80\x3f\x00\x00\x00\xc0", 8));
  CHECK(FeatureCache::decode_blob(bytes, 1, 2) == m);
  CHECK_THROWS_AS(FeatureCache::decode_blob(bytes, 2, 2), EncodingError);

  {
    std::fstream f(blob, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(cache.get(seq.sample_id, enc->backend_id()), EncodingError);
}

TEST_CASE("mapper examples") {
  const std::size_t d = 6;
  MapperParams p = init_mapper(d, d, 1);
  p.w1 = identity(d);
  p.w2 = identity(d);
  for (auto& v : p.w2.data()) v *= 2.0;  // gelu'(0) = 1/2
  std::fill(p.b1.begin(), p.b1.end(), 0.0);
  std::fill(p.b2.begin(), p.b2.end(), 0.0);
  Matrix x(3, d);
  Rng rng(2);
  for (auto& v : x.data()) v = 1e-4 * rng.normal();
  const auto y = map_features(x, p);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y.data()[i] - x.data()[i]) < 1e-7);

  MapperParams z = init_mapper(d, 3, 1);
  z.w1.fill(0.0);
  z.w2.fill(0.0);
  z.b2 = {1.0, -2.0, 0.5};
  const auto c = map_features(x, z);
  for (std::size_t r = 0; r < c.rows(); ++r) {
    CHECK(c(r, 0) == 1.0);
    CHECK(c(r, 1) == -2.0);
    CHECK(c(r, 2) == 0.5);
  }
  CHECK_THROWS_AS(map_features(Matrix(2, d + 1), p), ShapeError);
  CHECK(mapper_from_json(to_json(p)) == p);
}

TEST_CASE("mapper backward matches central differences") {
  Rng rng(4);
  auto p = init_mapper(8, 8, 9);
  for (auto& v : p.b1) v = 0.1 * rng.normal();
  for (auto& v : p.b2) v = 0.1 * rng.normal();
  Matrix x(4, 8), g(4, 8);
  for (auto& v : x.data()) v = rng.normal();
  for (auto& v : g.data()) v = rng.normal();
  auto objective = [&](const MapperParams& q) {
    const auto y = map_features(x, q);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * g.data()[i];
    return s;
  };
  MapperActivations acts;
  map_features(x, p, &acts);
  const auto grads = mapper_backward(acts, p, g);
  const double h = 1e-5;
  double worst = 0.0;
  auto check = [&](std::vector<double>& params, const std::vector<double>& analytic) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + h;
      const double up = objective(p);
      params[i] = keep - h;
      const double down = objective(p);
      params[i] = keep;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - analytic[i]) / std::max(1e-3, std::abs(numeric) + std::abs(analytic[i])));
    }
  };
  check(p.w1.data(), grads.w1.data());
  check(p.b1, grads.b1);
  check(p.w2.data(), grads.w2.data());
  check(p.b2, grads.b2);
  CHECK(worst < 1e-4);
}

TEST_CASE("mapper output is Lipschitz in its parameters") {
  Rng rng(6);
  const auto p = init_mapper(8, 8, 3);
  Matrix x(4, 8);
  for (auto& v : x.data()) v = rng.normal();
  const auto y0 = map_features(x, p);
  double ratio_small = 0.0;
  for (double eps : {1e-3, 1e-5}) {
    auto q = p;
    for (auto& v : q.w1.data()) v += eps;
    for (auto& v : q.w2.data()) v += eps;
    const auto y = map_features(x, q);
    double diff = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) diff = std::max(diff, std::abs(y.data()[i] - y0.data()[i]));
    const double ratio = diff / eps;
    if (eps == 1e-3) ratio_small = ratio;
    CHECK(ratio < 1e3);
    if (eps == 1e-5) CHECK(std::abs(ratio - ratio_small) / ratio_small < 0.05);
  }
}
