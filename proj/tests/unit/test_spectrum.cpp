#include <gtest/gtest.h>

#include <sstream>

#include "asvd/checkpoint.hpp"
#include "asvd/spectrum.hpp"
#include "constructions.hpp"
#include "oracles.hpp"

using namespace asvd;

TEST(SpectrumStats, IdentityAndKnownSpectrum) {
    const SpectrumStats id = singular_value_stats(svd(Matrix::Identity(4, 4)).sigma);
    EXPECT_NEAR(id.min, 1.0, 1e-15);
    EXPECT_NEAR(id.max, 1.0, 1e-15);
    EXPECT_NEAR(id.mean, 1.0, 1e-15);
    EXPECT_NEAR(id.median, 1.0, 1e-15);

    Vector d(4);
    d << 4, 2, 2, 0;
    const Network net({Layer{Matrix(d.asDiagonal()), Activation::tanh}});
    const SpectrumStats s = spectrum_stats(net)[0];
    EXPECT_NEAR(s.min, 0.0, 1e-15);
    EXPECT_NEAR(s.max, 4.0, 1e-14);
    EXPECT_NEAR(s.mean, 2.0, 1e-14);
    EXPECT_NEAR(s.median, 2.0, 1e-14);
    EXPECT_EQ(s.rows, 4);
}

TEST(SpectrumStats, OrderedAndReproducibleFromCheckpoint) {
    Rng rng = named_stream(81, "test/stats");
    const Network net = Network::random({{6, 9, Activation::tanh}, {9, 3, Activation::identity}}, rng);
    const auto a = spectrum_stats(net);
    const auto b = spectrum_stats(decode_checkpoint(encode_checkpoint(net)));
    ASSERT_EQ(a.size(), 2u);
    for (std::size_t l = 0; l < a.size(); ++l) {
        EXPECT_LE(a[l].min, a[l].median);
        EXPECT_LE(a[l].median, a[l].max);
        EXPECT_GE(a[l].mean, a[l].min);
        EXPECT_LE(a[l].mean, a[l].max);
        EXPECT_EQ(a[l].min, b[l].min);
        EXPECT_EQ(a[l].median, b[l].median);
    }
}

TEST(MarchenkoPastur, Examples) {
    EXPECT_DOUBLE_EQ(marchenko_pastur_threshold(400, 100, 1.0), 10.0);
    EXPECT_DOUBLE_EQ(marchenko_pastur_threshold(100, 400, 1.0), 10.0);
    EXPECT_EQ(marchenko_pastur_threshold(50, 50, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(marchenko_pastur_threshold(400, 100, 0.5, 3.0), 15.0);
    EXPECT_THROW(marchenko_pastur_threshold(0, 5, 1.0), std::invalid_argument);
    EXPECT_THROW(marchenko_pastur_threshold(5, 5, 0.0), std::invalid_argument);
}

TEST(MarchenkoPastur, IidGaussianSitsAboveEdge) {
    Rng rng = named_stream(82, "test/mp");
    const Matrix w = gaussian_matrix(rng, 400, 100);
    const NoiseClassification c = classify_spectrum(w, 1.0);
    EXPECT_GE(c.fraction_above, 0.95) << c.above << " of " << c.above + c.below;
    EXPECT_EQ(c.above + c.below, 100);
    EXPECT_FALSE(c.noise_sigma_estimated);
    EXPECT_DOUBLE_EQ(c.threshold, 10.0);
}

TEST(MarchenkoPastur, EstimatedSigmaAndNote) {
    Vector sigma(3);
    sigma << 9, 4, 1;
    EXPECT_DOUBLE_EQ(estimate_noise_sigma(sigma, 16, 3), 1.0);
    const NoiseClassification c = classify_spectrum(Matrix::Identity(5, 3) * 7.0);
    EXPECT_TRUE(c.noise_sigma_estimated);
    EXPECT_EQ(c.above, 3);
    EXPECT_FALSE(c.note.empty());
    const NoiseClassification z = classify_spectrum(Matrix::Zero(4, 2));
    EXPECT_EQ(z.below, 2);
}

TEST(Truncation, EckartYoungResidual) {
    Rng rng = named_stream(83, "test/eckart-young");
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix w = gaussian_matrix(rng, 7, 5);
        const SvdFactorization f = svd(w);
        const Vector ref = oracle::singular_values(w);
        for (Eigen::Index k = 0; k <= 5; ++k) {
            const double resid = (w - truncated_reconstruction(f, k)).norm();
            EXPECT_NEAR(resid, ref.tail(5 - k).norm(), 1e-8);
        }
    }
    EXPECT_THROW(truncated_reconstruction(svd(Matrix::Identity(2, 2)), 3), std::invalid_argument);
}

TEST(Prune, FullFractionIsIdentity) {
    const TaskData task = construct::low_rank_task(84, 16, 3);
    const Network net = construct::trained_on(task, 84);
    PruneSpec spec;
    spec.fraction = 1.0;
    const std::vector<TaskData> tasks = {task};
    const PruneResult r = prune_low_rank(net, spec, tasks);
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        EXPECT_LE((r.pruned.layer(l).weight - net.layer(l).weight).norm(), 1e-8);
    EXPECT_EQ(r.delta[0], 0.0);
}

TEST(Prune, SpecValidation) {
    const Network net({Layer{Matrix::Identity(3, 3), Activation::tanh}});
    PruneSpec zero;
    zero.fraction = 0.0;
    EXPECT_THROW(prune_low_rank(net, zero, {}), std::invalid_argument);
    PruneSpec both;
    both.fraction = 0.5;
    both.count = 1;
    EXPECT_THROW(prune_low_rank(net, both, {}), std::invalid_argument);
    PruneSpec neither;
    EXPECT_THROW(prune_low_rank(net, neither, {}), std::invalid_argument);
    PruneSpec bad_layer;
    bad_layer.count = 1;
    bad_layer.layers = {4};
    EXPECT_THROW(prune_low_rank(net, bad_layer, {}), std::invalid_argument);
}

TEST(Prune, InputNetworkUntouched) {
    Rng rng = named_stream(85, "test/prune-pure");
    const Network net = Network::random({{4, 4, Activation::tanh}}, rng);
    const Network copy = net;
    PruneSpec spec;
    spec.count = 1;
    const PruneResult r = prune_low_rank(net, spec, {});
    EXPECT_TRUE(net == copy);
    EXPECT_EQ(svd(r.pruned.layer(0).weight).sigma.tail(3).norm() < 1e-12, true);
}

TEST(Prune, RankOneLayerPrunedToRankOne) {
    Rng rng = named_stream(86, "test/rank-one");
    const Vector u = gaussian_vector(rng, 4);
    const Vector v = gaussian_vector(rng, 6);
    Matrix w = u * v.transpose() + gaussian_matrix(rng, 4, 6, 1e-9);
    const Network net({Layer{w, Activation::identity}});
    TaskData task;
    task.task_id = 1;
    task.kind = TaskKind::regression;
    task.target_dim = 4;
    task.test.inputs = gaussian_matrix(rng, 6, 100);
    task.test.targets = u * v.transpose() * task.test.inputs;
    task.train = task.test;
    PruneSpec spec;
    spec.count = 1;
    const std::vector<TaskData> tasks = {task};
    const PruneResult r = prune_low_rank(net, spec, tasks);
    EXPECT_LE(std::abs(r.delta[0]), 1e-12);
}

TEST(Prune, BelowIntrinsicRankDegrades) {
    const TaskData task = construct::low_rank_task(87, 16, 3);
    const Network net = construct::trained_on(task, 87);
    const std::vector<TaskData> tasks = {task};
    auto delta_at = [&](Eigen::Index k) {
        PruneSpec spec;
        spec.layers = {0};
        spec.count = k;
        return prune_low_rank(net, spec, tasks).delta[0];
    };
    const double at_rank = delta_at(3);
    EXPECT_LT(std::abs(at_rank), 0.01);
    EXPECT_LT(delta_at(1), at_rank);
}

TEST(DirectionNorms, InputsInTopRightSingularVector) {
    Rng rng = named_stream(88, "test/direction-span");
    const Network net = Network::random({{5, 5, Activation::tanh}}, rng);
    const SvdFactorization f = svd(net.layer(0).weight);
    const Matrix inputs = f.v.col(0) * gaussian_vector(rng, 30).transpose();
    const DirectionNorms d = direction_activation_norms(net, 0, inputs);
    EXPECT_GT(d.mean_abs_projection(0), 0.1);
    EXPECT_LE(d.mean_abs_projection.tail(4).maxCoeff(), 1e-12);
    for (Eigen::Index i = 0; i < 5; ++i) {
        const Vector ui = f.u.col(i);
        double direct = 0.0;
        for (Eigen::Index c = 0; c < inputs.cols(); ++c)
            direct += (ui * f.v.col(i).transpose() * inputs.col(c)).norm();
        EXPECT_NEAR(d.mean_abs_projection(i), direct / 30.0, 1e-12);
    }
}

TEST(DirectionNorms, NonNegativeAndSignInvariant) {
    Rng rng = named_stream(89, "test/direction-sign");
    const Network net = Network::random({{6, 4, Activation::tanh}}, rng);
    const Matrix inputs = gaussian_matrix(rng, 6, 50);
    const DirectionNorms a = direction_activation_norms(net, 0, inputs);
    const DirectionNorms b = direction_activation_norms(net, 0, -inputs);
    EXPECT_GE(a.mean_abs_projection.minCoeff(), 0.0);
    EXPECT_LE((a.mean_abs_projection - b.mean_abs_projection).norm(), 1e-14);
    EXPECT_THROW(direction_activation_norms(net, 1, inputs), std::invalid_argument);
}

TEST(DirectionNorms, DecayOnLowDimensionalTask) {
    const TaskData task = construct::low_rank_task(90, 16, 3);
    const Network net = construct::trained_on(task, 90);
    const DirectionNorms d = direction_activation_norms(net, 0, task.test.inputs);
    const Eigen::Index q = d.sigma.size() / 4;
    EXPECT_LT(d.mean_abs_projection.tail(q).mean(), d.mean_abs_projection.head(q).mean());

    std::ostringstream out;
    write_direction_csv(out, d);
    EXPECT_EQ(out.str().substr(0, out.str().find('\r')), "direction,sigma,mean_abs_projection");
}
