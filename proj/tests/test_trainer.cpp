#include "hazesplat/trainer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace hazesplat;

namespace {

GaussianCloud uniform_cloud(std::size_t n, double opacity, double scale = 0.05) {
    GaussianCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        GaussianParams g;
        g.mean = {0.01 * static_cast<double>(i), 0.0, 0.0};
        g.log_scale = std::log(scale);
        g.logit_opacity = logit(opacity);
        g.color = {0.5, 0.5, 0.5};
        cloud.push_back(g);
    }
    return cloud;
}

DensifyConfig refine_every_step() {
    DensifyConfig cfg;
    cfg.densify_start = 0;
    cfg.densify_stop = 100;
    cfg.refine_interval = 1;
    cfg.noise_lr = 0.0;
    return cfg;
}

// Four training and two validation views of the checker-wall preset at 16 x 16.
TrainingData small_data() {
    const GaussianCloud scene = make_scene("checker-wall", 0);
    const Orbit orbit = make_orbit(4, 2, 3.0, 16, 15.0);
    const Rgb bg{1.0f, 1.0f, 1.0f};
    TrainingData data;
    for (const CameraView& cam : orbit.train) {
        const RenderOutput r = render(scene, cam, bg);
        data.train.push_back({cam, r.color, pseudo_inverse_depth(r.depth, r.alpha), r.color});
    }
    for (const CameraView& cam : orbit.val) data.val.push_back({cam, render(scene, cam, bg).color});
    return data;
}

TrainConfig small_config(Strategy strategy) {
    TrainConfig cfg;
    cfg.init_points = 150;
    cfg.optim.total_steps = 60;
    cfg.optim.val_interval = 20;
    cfg.densify.strategy = strategy;
    cfg.densify.densify_start = 10;
    cfg.densify.densify_stop = 40;
    cfg.densify.refine_interval = 10;
    cfg.densify.cap_max = 180;
    cfg.densify.default_grad_threshold = 1e-6;
    return cfg;
}

Checkpoint ckpt(std::int64_t step, double psnr) { return Checkpoint{step, GaussianCloud{}, psnr, 0.0}; }

}  // namespace

TEST_CASE("adam first step moves by the learning rate") {
    std::vector<double> p{1.0, -2.0, 0.5};
    const std::vector<double> g{0.3, -4.0, 1e-3};
    AdamState s;
    adam_step(p, g, s, 0.01, 1, AdamHyper{});
    CHECK(p[0] == doctest::Approx(0.99).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(-1.99).epsilon(1e-9));
    CHECK(p[2] == doctest::Approx(0.49).epsilon(1e-9));

    std::vector<double> q{0.7};
    AdamState z;
    adam_step(q, std::vector<double>{0.0}, z, 0.1, 1, AdamHyper{});
    CHECK(q[0] == 0.7);
    CHECK(z.m[0] == 0.0);
    CHECK(z.v[0] == 0.0);

    CHECK_THROWS_AS(adam_step(q, std::vector<double>{1.0, 2.0}, z, 0.1, 1, AdamHyper{}), InvariantError);
    CHECK_THROWS_AS(adam_step(q, std::vector<double>{1.0}, z, 0.1, 0, AdamHyper{}), InvariantError);
}

TEST_CASE("adam trace on a quadratic matches the textbook update") {
    const AdamHyper hyper{0.9, 0.999, 1e-8};
    const double lr = 0.05;
    std::vector<double> p{2.0, -1.5};
    AdamState s;
    double x[2] = {2.0, -1.5}, m[2] = {0, 0}, v[2] = {0, 0};
    for (int t = 1; t <= 10; ++t) {
        const std::vector<double> g{2.0 * p[0], 6.0 * p[1]};
        adam_step(p, g, s, lr, t, hyper);
        for (int i = 0; i < 2; ++i) {
            const double gi = (i == 0 ? 2.0 : 6.0) * x[i];
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gi;
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gi * gi;
            const double mh = m[i] / (1.0 - std::pow(hyper.beta1, t));
            const double vh = v[i] / (1.0 - std::pow(hyper.beta2, t));
            x[i] -= lr * mh / (std::sqrt(vh) + hyper.eps);
        }
        for (int i = 0; i < 2; ++i) CHECK(std::fabs(p[i] - x[i]) < 1e-10);
    }
    CHECK(std::fabs(p[0]) < 2.0);
    CHECK(std::fabs(p[1]) < 1.5);
}

TEST_CASE("cloud optimizer remaps moments") {
    GaussianCloud cloud = uniform_cloud(3, 0.5);
    CloudOptimizer opt(OptimConfig{}, 3);
    CloudGradients g;
    g.resize(3);
    for (double& v : g.means) v = 1.0;
    opt.step(cloud, g, 1);
    CloudLayout layout{{2, 0, 0}, {0, 0, 1}};
    opt.apply(layout);
    CHECK(opt.size() == 3);
    CHECK(CloudLayout::identity(4).is_identity());
    CHECK_FALSE(layout.is_identity());
}

TEST_CASE("densify schedule") {
    const DensifyConfig cfg;
    CHECK_FALSE(should_densify(499, cfg));
    CHECK(should_densify(500, cfg));
    CHECK_FALSE(should_densify(550, cfg));
    CHECK(should_densify(2900, cfg));
    CHECK_FALSE(should_densify(3000, cfg));
    CHECK_FALSE(should_densify(3100, cfg));
}

TEST_CASE("noise scale decays linearly to zero") {
    const DensifyConfig cfg;
    CHECK(noise_scale(0, cfg) == 5e5);
    CHECK(noise_scale(4000, cfg) == doctest::Approx(2.5e5));
    CHECK(noise_scale(8000, cfg) == 0.0);
    CHECK(noise_scale(20000, cfg) == 0.0);
    for (int s = 0; s < 8000; s += 250) CHECK(noise_scale(s + 250, cfg) < noise_scale(s, cfg));
    CHECK(noise_gate(0.0) > 0.6);
    CHECK(noise_gate(0.5) < 1e-10);
    CHECK(noise_gate(0.1) < noise_gate(0.001));
}

TEST_CASE("densify config validation") {
    DensifyConfig cfg;
    CHECK_NOTHROW(cfg.validate(20000));
    CHECK_THROWS_AS(cfg.validate(2000), InvariantError);
    cfg.densify_start = 3000;
    CHECK_THROWS_AS(cfg.validate(20000), InvariantError);
    cfg = {};
    cfg.refine_interval = 0;
    CHECK_THROWS_AS(cfg.validate(20000), InvariantError);
    cfg = {};
    cfg.cap_max = 0;
    CHECK_THROWS_AS(cfg.validate(20000), InvariantError);
    CHECK(parse_strategy("mcmc") == Strategy::Mcmc);
    CHECK(parse_strategy(to_string(Strategy::Default)) == Strategy::Default);
    CHECK_THROWS_AS(parse_strategy("adc"), InvariantError);
}

TEST_CASE("mcmc step respects the cap") {
    DensifyConfig cfg = refine_every_step();
    cfg.cap_max = 10;
    GaussianCloud full = uniform_cloud(10, 0.5);
    const GaussianCloud before = full;
    std::mt19937_64 rng(1);
    const CloudLayout l = mcmc_step(full, 5, cfg, 1.6e-4, rng);
    CHECK(full == before);
    CHECK(l.is_identity());

    GaussianCloud grow = uniform_cloud(100, 0.5);
    cfg.cap_max = 103;
    mcmc_step(grow, 5, cfg, 1.6e-4, rng);
    CHECK(grow.size() == 103);
    for (int s = 0; s < 20; ++s) {
        mcmc_step(grow, s, cfg, 1.6e-4, rng);
        CHECK(grow.size() <= cfg.cap_max);
    }
}

TEST_CASE("mcmc relocation") {
    DensifyConfig cfg = refine_every_step();
    cfg.cap_max = 4;
    GaussianCloud alive = uniform_cloud(4, 0.5);
    const GaussianCloud before = alive;
    std::mt19937_64 rng(2);
    mcmc_step(alive, 3, cfg, 1.6e-4, rng);
    CHECK(alive == before);

    GaussianCloud mixed = uniform_cloud(4, 0.5);
    mixed.logit_opacities[1] = logit(0.001);
    mixed.means[3] = 9.0;
    const CloudLayout l = mcmc_step(mixed, 3, cfg, 1.6e-4, rng);
    CHECK(mixed.size() == 4);
    CHECK(mixed.means[3] != 9.0);
    CHECK(mixed.opacity(1) > cfg.opacity_prune_threshold);
    CHECK(l.reset[1] == 1);

    // A source shared with one copy is split so the pair composites to it.
    GaussianCloud pair = uniform_cloud(2, 0.6);
    pair.logit_opacities[1] = logit(0.0001);
    cfg.cap_max = 2;
    mcmc_step(pair, 3, cfg, 1.6e-4, rng);
    const double o = pair.opacity(0);
    CHECK(pair.opacity(1) == doctest::Approx(o));
    CHECK(1.0 - (1.0 - o) * (1.0 - o) == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("mcmc step is deterministic and noise stops with the schedule") {
    DensifyConfig cfg;
    cfg.densify_start = 0;
    cfg.densify_stop = 50;
    cfg.refine_interval = 10;
    cfg.noise_decay_step = 100;
    cfg.cap_max = 80;
    std::mt19937_64 r(3);
    GaussianCloud a = test_support::random_cloud(40, r);
    a.logit_opacities[0] = logit(0.001);
    GaussianCloud b = a;
    std::mt19937_64 ra(7), rb(7);
    for (int s = 0; s < 60; ++s) {
        mcmc_step(a, s, cfg, 1.6e-4, ra);
        mcmc_step(b, s, cfg, 1.6e-4, rb);
    }
    CHECK(a == b);
    const GaussianCloud late = a;
    mcmc_step(a, 100, cfg, 1.6e-4, ra);
    CHECK(a == late);
}

TEST_CASE("default densification prunes and splits") {
    DensifyConfig cfg = refine_every_step();
    GaussianCloud cloud = uniform_cloud(5, 0.5);
    cloud.logit_opacities[2] = logit(0.001);
    GradAccumulator acc;
    acc.resize(5);
    const CloudLayout l = default_densify_step(cloud, acc, 4, cfg, 2.0);
    CHECK(cloud.size() == 4);
    CHECK(l.source == std::vector<std::size_t>{0, 1, 3, 4});
    CHECK(acc.count.size() == 4);

    GaussianCloud big = uniform_cloud(3, 0.5, 0.2);
    GradAccumulator g;
    g.resize(3);
    g.screen_grad_sum[1] = 1.0;
    g.count[1] = 1;
    g.mean_grad_sum[3] = 2.0;
    const Vec3 centre = big.mean(1);
    default_densify_step(big, g, 4, cfg, 2.0);
    REQUIRE(big.size() == 4);
    CHECK(big.scale(1) == doctest::Approx(0.2 / 1.6));
    CHECK(big.scale(3) == doctest::Approx(0.2 / 1.6));
    CHECK(big.mean(1)[0] == doctest::Approx(centre[0] - 0.1));
    CHECK(big.mean(3)[0] == doctest::Approx(centre[0] + 0.1));

    GaussianCloud small = uniform_cloud(2, 0.5, 0.005);
    GradAccumulator h;
    h.resize(2);
    h.screen_grad_sum[0] = 1.0;
    h.count[0] = 1;
    default_densify_step(small, h, 4, cfg, 2.0);
    REQUIRE(small.size() == 3);
    CHECK(small.get(2).mean == small.get(0).mean);

    GaussianCloud idle = uniform_cloud(3, 0.5);
    GradAccumulator i;
    i.resize(3);
    i.screen_grad_sum[0] = 1.0;
    i.count[0] = 1;
    CHECK(default_densify_step(idle, i, 200, cfg, 2.0).is_identity());
    CHECK(idle.size() == 3);
}

TEST_CASE("best checkpoint selection") {
    const std::vector<Checkpoint> c{ckpt(0, 10.0), ckpt(1000, 18.5), ckpt(2000, 17.0)};
    CHECK(select_best_checkpoint(c).step == 1000);
    const std::vector<Checkpoint> tie{ckpt(0, 10.0), ckpt(1000, 18.5), ckpt(2000, 18.5)};
    CHECK(select_best_checkpoint(tie).step == 1000);
    const std::vector<Checkpoint> shuffled{ckpt(2000, 18.5), ckpt(0, 10.0), ckpt(1000, 18.5)};
    CHECK(select_best_checkpoint(shuffled).step == 1000);
    CHECK_THROWS_AS(select_best_checkpoint({}), InvariantError);
}

TEST_CASE("metrics csv layout") {
    MetricsRow first{0, {}, false, 12.5, true, 10};
    MetricsRow second{1, {}, true, 0.0, false, 11};
    second.loss.total = 0.25;
    const std::string csv = metrics_csv({first, second});
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == kMetricsHeader);
    std::getline(in, line);
    CHECK(line == "0,,,,,,,12.5,10");
    std::getline(in, line);
    CHECK(line == "1,0.25,0,0,0,0,0,,11");
}

TEST_CASE("train config validation") {
    TrainConfig cfg = small_config(Strategy::Mcmc);
    CHECK_NOTHROW(cfg.validate());
    cfg.densify.cap_max = 100;
    CHECK_THROWS_AS(cfg.validate(), InvariantError);
    cfg = small_config(Strategy::Mcmc);
    cfg.densify.densify_stop = 61;
    CHECK_THROWS_AS(cfg.validate(), InvariantError);
    cfg = small_config(Strategy::Mcmc);
    cfg.optim.lr_means = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvariantError);
    cfg = small_config(Strategy::Mcmc);
    cfg.gamma = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvariantError);
    TrainingData empty = small_data();
    empty.val.clear();
    CHECK_THROWS_AS(train(empty, small_config(Strategy::Mcmc), 0), InvariantError);
}

TEST_CASE("initial cloud fills the bounding box") {
    TrainConfig cfg;
    cfg.init_points = 500;
    std::mt19937_64 rng(4);
    const GaussianCloud c = initial_cloud(cfg, {-1, -2, 0}, {1, 2, 3}, rng);
    CHECK(c.size() == 500);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Vec3 m = c.mean(i);
        CHECK((m[0] >= -1 && m[0] <= 1 && m[1] >= -2 && m[1] <= 2 && m[2] >= 0 && m[2] <= 3));
        CHECK(c.opacity(i) == doctest::Approx(0.1));
    }
    CHECK_THROWS_AS(initial_cloud(cfg, {0, 0, 0}, {1, 0, 1}, rng), InvariantError);
}

TEST_CASE("zero-step training keeps the initial cloud") {
    TrainConfig cfg = small_config(Strategy::Mcmc);
    cfg.optim.total_steps = 0;
    const TrainResult r = train(small_data(), cfg, 5);
    REQUIRE(r.checkpoints.size() == 1);
    CHECK(r.checkpoints[0].step == 0);
    CHECK(r.checkpoints[0].cloud.size() == cfg.init_points);
    CHECK(r.metrics.size() == 1);
    CHECK(r.gaussian_counts == std::vector<std::size_t>{cfg.init_points});
}

TEST_CASE("training invariants for both strategies") {
    const TrainingData data = small_data();
    for (Strategy s : {Strategy::Mcmc, Strategy::Default}) {
        CAPTURE(to_string(s));
        const TrainConfig cfg = small_config(s);
        const TrainResult a = train(data, cfg, 11);
        const TrainResult b = train(data, cfg, 11);
        REQUIRE(a.checkpoints.size() == 4);
        for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
            CHECK(a.checkpoints[i].step == static_cast<std::int64_t>(20 * i));
            CHECK(a.checkpoints[i].cloud == b.checkpoints[i].cloud);
            CHECK(a.checkpoints[i].val_psnr == b.checkpoints[i].val_psnr);
        }
        CHECK(a.gaussian_counts == b.gaussian_counts);
        CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));
        REQUIRE(a.gaussian_counts.size() == 61);
        for (std::size_t n : a.gaussian_counts) CHECK(n <= cfg.densify.cap_max);
        CHECK(a.gaussian_counts.back() != cfg.init_points);
        for (int step = cfg.densify.densify_stop; step <= cfg.optim.total_steps; ++step)
            CHECK(a.gaussian_counts[step] == a.gaussian_counts[cfg.densify.densify_stop]);
        CHECK(a.metrics.size() == 61);
        for (const MetricsRow& row : a.metrics) CHECK(std::isfinite(row.loss.total));
        CHECK(select_best_checkpoint(a.checkpoints).val_psnr >= a.checkpoints[0].val_psnr);
    }
    TrainConfig other = small_config(Strategy::Mcmc);
    CHECK(train(data, other, 12).checkpoints.back().cloud != train(data, other, 11).checkpoints.back().cloud);
}
