#include "qttfem/errors.hpp"
#include "qttfem/tensor_train.hpp"
#include "qttfem/tt_io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

namespace qttfem {
namespace {

using testing::as_eigen;
using testing::max_abs_diff;
using testing::norm2;
using testing::random_operator;
using testing::random_vector;

const std::vector<Index> kDims3{4, 4, 4};

TEST(QttEncode, BigEndianDigits) {
  EXPECT_EQ(qtt_encode(6, 3), (std::vector<Index>{1, 1, 0}));
  EXPECT_EQ(qtt_encode(0, 4), (std::vector<Index>{0, 0, 0, 0}));
  EXPECT_EQ(qtt_encode((1U << 5) - 1, 5), (std::vector<Index>{1, 1, 1, 1, 1}));
}

TEST(QttEncode, RoundTripAndWeights) {
  for (int d = 1; d <= 8; ++d) {
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << d); ++i) {
      const auto digits = qtt_encode(i, d);
      std::uint64_t weighted = 0;
      for (int k = 0; k < d; ++k) weighted += static_cast<std::uint64_t>(digits[k]) << (d - 1 - k);
      ASSERT_EQ(weighted, i);
      ASSERT_EQ(qtt_decode(digits), i);
    }
  }
}

TEST(QttEncode, OutOfRangeIsDomainError) {
  EXPECT_THROW(qtt_encode(8, 3), DomainError);
  EXPECT_THROW(qtt_decode(std::vector<Index>{0, 2}), DomainError);
}

TEST(TensorTrain, RejectsBrokenRankChain) {
  std::vector<Core> cores{Core(1, 2, 2), Core(3, 2, 1)};
  EXPECT_THROW(TensorTrain{cores}, DomainError);
  std::vector<Core> boundary{Core(2, 2, 1)};
  EXPECT_THROW(TensorTrain{boundary}, DomainError);
}

TEST(FromDense, SeparableInputsHaveRankOne) {
  for (int d = 1; d <= 6; ++d) {
    const std::vector<Index> dims(static_cast<std::size_t>(d), 2);
    std::vector<double> ones(std::size_t{1} << d, 1.0);
    EXPECT_EQ(tt_from_dense(ones, dims, {}).max_rank(), 1);
    std::vector<double> e0(std::size_t{1} << d, 0.0);
    e0[0] = 1.0;
    EXPECT_EQ(tt_from_dense(e0, dims, {}).max_rank(), 1);
  }
}

TEST(FromDense, RandomRoundTripIsExactAtZeroTolerance) {
  std::mt19937_64 rng(7);
  const std::vector<Index> dims(6, 2);
  const auto v = random_vector(64, rng);
  const auto back = tt_to_dense(tt_from_dense(v, dims, TruncationPolicy::exact()));
  EXPECT_LE(max_abs_diff(v, back), 1e-12 * norm2(v));
}

TEST(FromDense, RoundTripPropertyOverShapes) {
  std::mt19937_64 rng(11);
  const std::vector<std::vector<Index>> shapes{{4096}, {2, 2048}, {2, 4, 4, 4, 4, 4, 2}, {8, 8, 8, 8}, {3, 5, 7}};
  for (const auto& dims : shapes) {
    const auto total = std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
    const auto v = random_vector(static_cast<std::size_t>(total), rng);
    const auto back = tt_to_dense(tt_from_dense(v, dims, TruncationPolicy::exact()));
    EXPECT_LE(max_abs_diff(v, back), 1e-12 * norm2(v));
  }
}

TEST(FromDense, DimensionMismatchIsDomainError) {
  std::vector<double> v(10, 1.0);
  EXPECT_THROW(tt_from_dense(v, std::vector<Index>{2, 4}, {}), DomainError);
}

TEST(ToDense, OnesAndCapacity) {
  const std::vector<Index> dims{2, 2};
  EXPECT_EQ(tt_to_dense(TensorTrain::ones(dims)), (std::vector<double>{1, 1, 1, 1}));
  const std::vector<Index> big(12, 4);
  EXPECT_THROW(tt_to_dense(TensorTrain::ones(big)), CapacityError);
}

TEST(Entry, MatchesDenseAndSlices) {
  std::mt19937_64 rng(3);
  const auto t = TensorTrain::random(kDims3, std::vector<Index>{3, 5}, rng);
  const auto dense = tt_to_dense(t);
  for (Index lin = 0; lin < 64; ++lin) {
    const auto idx = multi_index_from_linear(lin, kDims3);
    const double ref = dense[static_cast<std::size_t>(lin)];
    EXPECT_NEAR(tt_entry(t, idx), ref, 1e-14 * std::max(1.0, std::abs(ref)));
    EXPECT_NEAR(testing::entry_by_slices(t, idx), ref, 1e-14 * std::max(1.0, std::abs(ref)));
  }
  EXPECT_DOUBLE_EQ(tt_entry(TensorTrain::ones(kDims3), std::vector<Index>{3, 0, 2}), 1.0);
  EXPECT_THROW(tt_entry(t, std::vector<Index>{4, 0, 0}), DomainError);
}

TEST(Entry, DecodeConsistencyOnBinaryTrains) {
  std::mt19937_64 rng(5);
  const std::vector<Index> dims(7, 2);
  const auto t = TensorTrain::random(dims, std::vector<Index>{2, 3, 4, 4, 3, 2}, rng);
  const auto dense = tt_to_dense(t);
  for (std::uint64_t i = 0; i < 128; ++i)
    EXPECT_NEAR(tt_entry(t, qtt_encode(i, 7)), dense[i], 1e-13 * std::max(1.0, std::abs(dense[i])));
}

TEST(AddScale, Examples) {
  std::mt19937_64 rng(13);
  const auto a = TensorTrain::random(kDims3, std::vector<Index>{2, 3}, rng);
  const auto zero = tt_round(tt_add(a, tt_scale(a, -1.0)), {});
  EXPECT_LE(tt_norm(zero), 1e-14 * tt_norm(a));

  const auto two = tt_add(TensorTrain::ones(kDims3), TensorTrain::ones(kDims3));
  for (double v : tt_to_dense(two)) EXPECT_DOUBLE_EQ(v, 2.0);

  const auto b = TensorTrain::random(kDims3, std::vector<Index>{4, 2}, rng);
  const auto da = tt_to_dense(a);
  const auto db = tt_to_dense(b);
  const auto sum = tt_add(a, b);
  EXPECT_LE(sum.max_rank(), a.max_rank() + b.max_rank());
  const auto ds = tt_to_dense(sum);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_NEAR(ds[i], da[i] + db[i], 1e-13);
  const auto axpy = tt_to_dense(tt_axpy(-2.5, b, a));
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_NEAR(axpy[i], da[i] - 2.5 * db[i], 1e-13);

  EXPECT_THROW(tt_add(a, TensorTrain::ones(std::vector<Index>{4, 4, 2})), DomainError);
}

TEST(Hadamard, Examples) {
  std::mt19937_64 rng(17);
  const auto v = TensorTrain::random(kDims3, std::vector<Index>{3, 3}, rng);
  const auto w = TensorTrain::random(kDims3, std::vector<Index>{2, 4}, rng);
  EXPECT_LE(max_abs_diff(tt_to_dense(tt_hadamard(TensorTrain::ones(kDims3), v)), tt_to_dense(v)), 1e-15);
  const auto h = tt_hadamard(v, w);
  EXPECT_EQ(h.ranks(), (std::vector<Index>{1, 6, 12, 1}));
  const auto dv = tt_to_dense(v);
  const auto dw = tt_to_dense(w);
  const auto dh = tt_to_dense(h);
  for (std::size_t i = 0; i < dh.size(); ++i) EXPECT_NEAR(dh[i], dv[i] * dw[i], 1e-13);
  EXPECT_THROW(tt_hadamard(v, TensorTrain::ones(std::vector<Index>{4, 4})), DomainError);
}

TEST(DotNorm, Examples) {
  const std::vector<Index> dims(4, 2);
  for (std::uint64_t i = 0; i < 16; ++i)
    for (std::uint64_t j = 0; j < 16; ++j)
      EXPECT_DOUBLE_EQ(tt_dot(TensorTrain::unit(dims, qtt_encode(i, 4)), TensorTrain::unit(dims, qtt_encode(j, 4))),
                       i == j ? 1.0 : 0.0);
  for (int d = 1; d <= 10; ++d) {
    const std::vector<Index> bits(static_cast<std::size_t>(d), 2);
    EXPECT_NEAR(tt_norm(TensorTrain::ones(bits)), std::pow(2.0, d / 2.0), 1e-12 * std::pow(2.0, d / 2.0));
  }
  std::mt19937_64 rng(19);
  const auto a = TensorTrain::random(kDims3, std::vector<Index>{3, 2}, rng);
  const auto b = TensorTrain::random(kDims3, std::vector<Index>{2, 5}, rng);
  const double ref = as_eigen(tt_to_dense(a)).dot(as_eigen(tt_to_dense(b)));
  EXPECT_NEAR(tt_dot(a, b), ref, 1e-12 * std::abs(ref));
  const double n = tt_norm(a);
  EXPECT_NEAR(n * n, tt_dot(a, a), 1e-12 * tt_dot(a, a));
  EXPECT_NEAR(tt_sum(a), as_eigen(tt_to_dense(a)).sum(), 1e-12 * norm2(tt_to_dense(a)));
}

TEST(Round, ParallelVectorsKeepRanks) {
  std::mt19937_64 rng(23);
  const auto v = tt_round(TensorTrain::random(std::vector<Index>{4, 4, 4, 4}, std::vector<Index>{3, 4, 2}, rng), {});
  const auto r = tt_round(tt_add(v, v), {});
  EXPECT_EQ(r.ranks(), v.ranks());
  EXPECT_LE(max_abs_diff(tt_to_dense(r), tt_to_dense(tt_scale(v, 2.0))), 1e-12 * tt_norm(v));
}

TEST(Round, ZeroToleranceIsEntrywiseExact) {
  std::mt19937_64 rng(29);
  const auto v = TensorTrain::random(std::vector<Index>{2, 4, 4, 4}, std::vector<Index>{2, 5, 3}, rng);
  const auto r = tt_round(v, TruncationPolicy::exact());
  EXPECT_LE(max_abs_diff(tt_to_dense(r), tt_to_dense(v)), 1e-13 * testing::max_abs(tt_to_dense(v)));
}

TEST(Round, ZeroVectorIsCanonicalRankOne) {
  std::mt19937_64 rng(31);
  const auto v = TensorTrain::random(kDims3, std::vector<Index>{3, 3}, rng);
  const auto z = tt_round(tt_scale(v, 0.0), {});
  EXPECT_EQ(z.max_rank(), 1);
  EXPECT_EQ(tt_norm(z), 0.0);
}

// Best rank-r error of each unfolding is a lower bound for any TT of ranks r;
// rounding is quasi-optimal within sqrt(d-1) of the largest of these.
TEST(Round, RankCapWithinTwiceOptimalUnfoldingError) {
  std::mt19937_64 rng(37);
  const std::vector<Index> dims{4, 4, 4, 4};
  const auto v = TensorTrain::random(dims, std::vector<Index>{4, 6, 4}, rng);
  const auto dense = tt_to_dense(v);
  const Index cap = 2;
  double best = 0.0;
  Index rows = 1;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    rows *= dims[k];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> unf(dense.data(), rows,
                                                                                                  256 / rows);
    Eigen::JacobiSVD<Matrix> svd{Matrix(unf)};
    const Vector s = svd.singularValues();
    best = std::max(best, s.tail(s.size() - cap).norm());
  }
  const auto r = tt_round(v, TruncationPolicy{0.0, cap});
  EXPECT_LE(r.max_rank(), cap);
  const double err = norm2(tt_to_dense(tt_add(r, tt_scale(v, -1.0))));
  EXPECT_LE(err, 2.0 * best);
  EXPECT_GE(err, best * (1.0 - 1e-12));
}

TEST(Round, ContractProperty) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> rank(1, 6);
  const std::vector<double> tolerances{1e-1, 1e-3, 1e-6, 1e-10};
  for (int trial = 0; trial < 40; ++trial) {
    const std::vector<Index> dims{2, 4, 4, 4, 2};
    std::vector<Index> ranks{rank(rng), rank(rng), rank(rng), rank(rng)};
    const auto a = TensorTrain::random(dims, ranks, rng);
    const double eps = tolerances[static_cast<std::size_t>(trial) % tolerances.size()];
    const auto r = tt_round(a, {eps, kUnboundedRank});
    const auto ar = a.ranks();
    const auto rr = r.ranks();
    for (std::size_t k = 0; k < ar.size(); ++k) EXPECT_LE(rr[k], ar[k]);
    const double err = norm2(tt_to_dense(tt_axpy(-1.0, r, a)));
    EXPECT_LE(err, eps * tt_norm(a) * (1.0 + 1e-10));
  }
}

TEST(Apply, IdentityZeroAndDense) {
  std::mt19937_64 rng(43);
  const auto v = TensorTrain::random(kDims3, std::vector<Index>{3, 2}, rng);
  EXPECT_LE(max_abs_diff(tt_to_dense(tt_apply(TTOperator::identity(kDims3), v, {})), tt_to_dense(v)), 1e-13);
  EXPECT_EQ(tt_norm(tt_apply(TTOperator::zeros(kDims3, kDims3), v, {})), 0.0);

  const auto op = random_operator(kDims3, kDims3, {3, 4}, rng);
  const Vector ref = tt_op_to_dense(op) * as_eigen(tt_to_dense(v));
  const auto got = tt_to_dense(tt_apply(op, v, TruncationPolicy::exact()));
  EXPECT_LE((as_eigen(got) - ref).norm(), 1e-12 * ref.norm());

  const auto rect = random_operator({2, 3, 4}, kDims3, {2, 2}, rng);
  const auto y = tt_apply(rect, v, {});
  EXPECT_EQ(y.mode_dims(), (std::vector<Index>{2, 3, 4}));
  EXPECT_THROW(tt_apply(rect, y, {}), DomainError);
}

TEST(Apply, StreamedResidualNormMatchesDense) {
  std::mt19937_64 rng(53);
  const std::vector<Index> dims{2, 4, 4, 4};
  const auto op = random_operator(dims, dims, {3, 4, 2}, rng);
  const auto x = TensorTrain::random(dims, std::vector<Index>{2, 3, 2}, rng);
  const auto f = TensorTrain::random(dims, std::vector<Index>{3, 1, 4}, rng);
  const Vector r = tt_op_to_dense(op) * as_eigen(tt_to_dense(x)) - as_eigen(tt_to_dense(f));
  EXPECT_NEAR(tt_residual_norm(op, x, f), r.norm(), 1e-12 * r.norm());
  // x solves op x = op x exactly
  EXPECT_LE(tt_residual_norm(op, x, tt_apply_exact(op, x)), 1e-12 * tt_norm(x));
  const std::vector<Index> one{5};
  const auto op1 = random_operator(one, one, {}, rng);
  const auto x1 = TensorTrain::random(one, std::vector<Index>{}, rng);
  const Vector r1 = tt_op_to_dense(op1) * as_eigen(tt_to_dense(x1)) - as_eigen(tt_to_dense(x1));
  EXPECT_NEAR(tt_residual_norm(op1, x1, x1), r1.norm(), 1e-13 * r1.norm());
  EXPECT_THROW(tt_residual_norm(op, x, TensorTrain::ones(kDims3)), DomainError);
}

TEST(OperatorAlgebra, Examples) {
  std::mt19937_64 rng(47);
  const auto a = random_operator(kDims3, kDims3, {2, 3}, rng);
  const auto b = random_operator(kDims3, kDims3, {3, 2}, rng);
  const Matrix da = tt_op_to_dense(a);
  const Matrix db = tt_op_to_dense(b);

  EXPECT_LE((tt_op_to_dense(tt_op_compose(TTOperator::identity(kDims3), a)) - da).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((tt_op_to_dense(tt_diag(TensorTrain::ones(kDims3))) - Matrix::Identity(64, 64)).cwiseAbs().maxCoeff(),
            0.0);
  EXPECT_LE((tt_op_to_dense(tt_op_add(a, b)) - (da + db)).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((tt_op_to_dense(tt_op_compose(a, b)) - da * db).cwiseAbs().maxCoeff(), 1e-12 * (da * db).norm());
  EXPECT_LE((tt_op_to_dense(tt_op_transpose(a)) - da.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((tt_op_to_dense(tt_op_scale(a, -3.0)) - (-3.0) * da).cwiseAbs().maxCoeff(), 1e-13);

  const auto roundtrip = tt_op_to_dense(tt_op_from_dense(da, kDims3, kDims3, TruncationPolicy::exact()));
  EXPECT_LE((roundtrip - da).norm(), 1e-12 * da.norm());

  const Vector diag = as_eigen(tt_to_dense(tt_op_diagonal(a)));
  EXPECT_LE((diag - da.diagonal()).cwiseAbs().maxCoeff(), 1e-13);

  const std::vector<Index> rows{2, 3, 4};
  const std::vector<Index> cols{4, 2, 2};
  const auto rect = random_operator(rows, cols, {2, 2}, rng);
  const Matrix dr = tt_op_to_dense(rect);
  for (Index i = 0; i < 24; ++i)
    for (Index j = 0; j < 16; ++j)
      EXPECT_NEAR(tt_op_entry(rect, multi_index_from_linear(i, rows), multi_index_from_linear(j, cols)), dr(i, j),
                  1e-13);
  EXPECT_THROW(tt_op_add(a, rect), DomainError);
}

// dense(op(a, b)) == op(dense(a), dense(b)) over randomly drawn shapes/ranks.
TEST(OperatorAlgebra, HomomorphismProperty) {
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<int> rank(1, 4);
  std::uniform_int_distribution<int> mode(1, 3);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Index> dims{2 * mode(rng), mode(rng) + 1, 2 * mode(rng)};
    std::vector<Index> ra{rank(rng), rank(rng)}, rb{rank(rng), rank(rng)};
    const auto a = TensorTrain::random(dims, ra, rng);
    const auto b = TensorTrain::random(dims, rb, rng);
    const Vector da = as_eigen(tt_to_dense(a));
    const Vector db = as_eigen(tt_to_dense(b));
    const double scale = da.norm() * db.norm();
    EXPECT_LE((as_eigen(tt_to_dense(tt_add(a, b))) - (da + db)).norm(), 1e-12 * (da.norm() + db.norm()));
    EXPECT_LE((as_eigen(tt_to_dense(tt_scale(a, 0.7))) - 0.7 * da).norm(), 1e-12 * da.norm());
    EXPECT_LE((as_eigen(tt_to_dense(tt_hadamard(a, b))) - da.cwiseProduct(db)).norm(), 1e-12 * scale);
    EXPECT_NEAR(tt_dot(a, b), da.dot(db), 1e-12 * scale);

    const auto op = random_operator(dims, dims, {rank(rng), rank(rng)}, rng);
    const auto op2 = random_operator(dims, dims, {rank(rng), rank(rng)}, rng);
    const Matrix dop = tt_op_to_dense(op);
    const Matrix dop2 = tt_op_to_dense(op2);
    const Vector ax = dop * da;
    EXPECT_LE((as_eigen(tt_to_dense(tt_apply(op, a, TruncationPolicy::exact()))) - ax).norm(),
              1e-12 * dop.norm() * da.norm());
    EXPECT_LE((tt_op_to_dense(tt_op_compose(op, op2)) - dop * dop2).norm(), 1e-12 * dop.norm() * dop2.norm());
  }
}

TEST(Footprint, StorageLaw) {
  const auto f = memory_footprint(TensorTrain::ones(std::vector<Index>{2, 2, 2}));
  EXPECT_EQ(f.bytes, 48U);
  EXPECT_EQ(f.dense_equivalent_bytes, 64.0);

  std::mt19937_64 rng(59);
  const std::vector<Index> dims{2, 4, 4, 4, 4};
  const std::vector<Index> ranks{2, 5, 7, 3};
  const auto t = TensorTrain::random(dims, ranks, rng);
  std::uint64_t expected = 0;
  const auto r = t.ranks();
  for (std::size_t k = 0; k < dims.size(); ++k) expected += static_cast<std::uint64_t>(r[k] * dims[k] * r[k + 1]);
  EXPECT_EQ(memory_footprint(t).scalars, expected);
  EXPECT_EQ(memory_footprint(t).bytes, expected * 8);

  const Index rank = 3;
  const auto op = random_operator({2, 2, 2, 2}, {2, 2, 2, 2}, {rank, rank, rank}, rng);
  EXPECT_LE(memory_footprint(op).bytes, static_cast<std::uint64_t>(4 * rank * rank * 4 * 8));
}

TEST(Container, SaveLoadIsBitwiseStable) {
  std::mt19937_64 rng(61);
  const auto v = TensorTrain::random(std::vector<Index>{2, 4, 4}, std::vector<Index>{2, 3}, rng);
  const auto op = random_operator({2, 4}, {2, 4}, {3}, rng);
  const auto dir = std::filesystem::temp_directory_path();
  const auto pv = dir / "qttfem_test_vec.qtt";
  const auto po = dir / "qttfem_test_op.qtt";
  save_container(pv, v);
  save_container(po, op);
  const auto lv = std::get<TensorTrain>(load_container(pv));
  const auto lo = std::get<TTOperator>(load_container(po));
  EXPECT_EQ(encode_container(lv), encode_container(v));
  EXPECT_EQ(encode_container(lo), encode_container(op));
  EXPECT_EQ(lo.row_dims(), op.row_dims());
  std::filesystem::remove(pv);
  std::filesystem::remove(po);
}

TEST(Container, LayoutAndCorruption) {
  const auto bytes = encode_container(TensorTrain::ones(std::vector<Index>{2}));
  // magic + kind + count + 4 dims + 2 doubles
  ASSERT_EQ(bytes.size(), 4U + 4U + 4U + 16U + 16U);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "QTT1");
  EXPECT_EQ(bytes[4], 0);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[12], 1);  // left
  EXPECT_EQ(bytes[16], 2);  // rows
  EXPECT_EQ(bytes[20], 1);  // cols
  EXPECT_EQ(bytes[24], 1);  // right
  EXPECT_EQ(bytes[35], 0x3F);  // 1.0 little-endian high byte

  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_container(bad), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_container(truncated), FormatError);
  auto badrank = bytes;
  badrank[24] = 2;
  EXPECT_THROW(decode_container(badrank), FormatError);
}

}  // namespace
}  // namespace qttfem
