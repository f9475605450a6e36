#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "support/gradcheck.hpp"
#include "vivat/losses.hpp"
#include "vivat/model/discriminator.hpp"
#include "vivat/model/perceptual.hpp"

using namespace vivat;
using namespace vivat::testing;

TEST_CASE("kl_loss analytic cases") {
    LatentDistribution<double> dist;
    dist.mu = Tensor<double>(1, 2, 1, 1);
    dist.logvar = Tensor<double>(1, 2, 1, 1);
    CHECK(kl_loss(dist) == doctest::Approx(0.0));

    dist.mu.v = {1.0, 0.0};
    CHECK(kl_loss(dist) == doctest::Approx(0.5));

    dist.mu.v = {0.0, 0.0};
    dist.logvar.v[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(kl_loss(dist), ValidationError);
}

TEST_CASE("kl_loss is non-negative and zero only at the prior") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        LatentDistribution<double> d;
        d.mu = Tensor<double>(2, 3, 2, 2);
        d.logvar = Tensor<double>(2, 3, 2, 2);
        d.mu.fill_normal(rng);
        d.logvar.fill_normal(rng, 0.7);
        CHECK(kl_loss(d) >= 0.0);
    }
    LatentDistribution<double> prior;
    prior.mu = Tensor<double>(1, 4, 3, 3);
    prior.logvar = Tensor<double>(1, 4, 3, 3);
    CHECK(kl_loss(prior) < 1e-9);
}

TEST_CASE("kl_loss matches a Monte-Carlo KL estimate") {
    // unit-sized version of the acceptance oracle: E_q[log q(z) - log p(z)]
    Rng rng(7);
    LatentDistribution<double> d;
    d.mu = Tensor<double>(1, 3, 1, 1);
    d.logvar = Tensor<double>(1, 3, 1, 1);
    d.mu.v = {0.8, -1.2, 0.4};
    d.logvar.v = {0.5, -0.6, 0.1};

    const int samples = 200000;
    double acc = 0;
    for (int s = 0; s < samples; ++s) {
        double lr = 0;
        for (int j = 0; j < 3; ++j) {
            double sigma = std::exp(0.5 * d.logvar.v[j]);
            double z = d.mu.v[j] + sigma * rng.normal();
            double zq = (z - d.mu.v[j]) / sigma;
            double logq = -0.5 * zq * zq - 0.5 * d.logvar.v[j];
            double logp = -0.5 * z * z;
            lr += logq - logp;  // shared -log sqrt(2pi) cancels
        }
        acc += lr;
    }
    double mc = acc / samples;
    CHECK(rel_err(mc, kl_loss(d)) < 0.02);
}

TEST_CASE("kl_loss gradient") {
    Rng rng(11);
    LatentDistribution<double> d;
    d.mu = Tensor<double>(1, 2, 4, 4);
    d.logvar = Tensor<double>(1, 2, 4, 4);
    d.mu.fill_normal(rng);
    d.logvar.fill_normal(rng, 0.5);
    Tensor<double> gmu = d.mu.like_zeros(), glv = d.logvar.like_zeros();
    kl_loss_backward(d, 1.0, gmu, glv);
    auto vmu = [&] { return kl_loss(d); };
    CHECK(max_grad_rel_err(d.mu, gmu, vmu) < 1e-6);
    CHECK(max_grad_rel_err(d.logvar, glv, vmu) < 1e-6);
}

TEST_CASE("recon_loss analytic cases, naive oracle and gradient") {
    Tensor<double> x(1, 3, 4, 4), same(1, 3, 4, 4);
    CHECK(recon_loss(x, same) == 0.0);

    Tensor<double> half(1, 3, 4, 4, 0.5);
    CHECK(recon_loss(x, half) == doctest::Approx(0.25));

    Tensor<double> bad(1, 3, 4, 5);
    CHECK_THROWS_AS(recon_loss(x, bad), ShapeError);

    Rng rng(13);
    Tensor<double> a(2, 3, 4, 4), b(2, 3, 4, 4);
    a.fill_normal(rng);
    b.fill_normal(rng);
    double naive = 0;
    for (size_t i = 0; i < a.v.size(); ++i) naive += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
    naive /= static_cast<double>(a.numel());
    CHECK(std::abs(naive - recon_loss(a, b)) < 1e-6);

    Tensor<double> g = b.like_zeros();
    recon_loss_backward(a, b, 1.0, g);
    auto value = [&] { return recon_loss(a, b); };
    CHECK(max_grad_rel_err(b, g, value) < 1e-6);
}

TEST_CASE("adversarial generator loss: variants, limits, oracle, gradient") {
    Tensor<double> zero_logit(1, 1, 2, 2);
    CHECK(adv_generator_loss(zero_logit, AdvVariant::paper) ==
          doctest::Approx(std::log(0.5)).epsilon(1e-9));

    Tensor<double> very_negative(1, 1, 2, 2, -40.0);
    CHECK(adv_generator_loss(very_negative, AdvVariant::paper) == doctest::Approx(0.0));

    Rng rng(17);
    Tensor<double> logits(2, 1, 3, 3);
    logits.fill_normal(rng, 2.0);
    double n = static_cast<double>(logits.numel());
    double paper = 0, nonsat = 0, hinge = 0;
    for (auto l : logits.v) {
        paper += std::log(1.0 - 1.0 / (1.0 + std::exp(-l)));
        nonsat += -std::log(1.0 / (1.0 + std::exp(-l)));
        hinge += -l;
    }
    CHECK(std::abs(adv_generator_loss(logits, AdvVariant::paper) - paper / n) < 1e-6);
    CHECK(std::abs(adv_generator_loss(logits, AdvVariant::non_saturating) - nonsat / n) < 1e-6);
    CHECK(std::abs(adv_generator_loss(logits, AdvVariant::hinge) - hinge / n) < 1e-6);

    for (auto variant : {AdvVariant::paper, AdvVariant::non_saturating, AdvVariant::hinge}) {
        Tensor<double> g = logits.like_zeros();
        adv_generator_loss_backward(logits, variant, 1.0, g);
        auto value = [&] { return adv_generator_loss(logits, variant); };
        CHECK(max_grad_rel_err(logits, g, value) < 1e-6);
    }
}

TEST_CASE("discriminator loss: analytic cases, oracle, gradient") {
    Tensor<double> zeros(1, 1, 2, 2);
    CHECK(discriminator_loss(zeros, zeros, DiscVariant::vanilla) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));

    Tensor<double> strong_real(1, 1, 2, 2, 40.0), strong_fake(1, 1, 2, 2, -40.0);
    CHECK(discriminator_loss(strong_real, strong_fake, DiscVariant::vanilla) ==
          doctest::Approx(0.0));

    Rng rng(19);
    Tensor<double> r(1, 1, 3, 3), f(1, 1, 3, 3);
    r.fill_normal(rng);
    f.fill_normal(rng);
    double naive = 0;
    for (auto l : r.v) naive += std::log1p(std::exp(-l)) / r.numel();
    for (auto l : f.v) naive += std::log1p(std::exp(l)) / f.numel();
    CHECK(std::abs(discriminator_loss(r, f, DiscVariant::vanilla) - naive) < 1e-6);

    for (auto variant : {DiscVariant::vanilla, DiscVariant::hinge}) {
        Tensor<double> gr = r.like_zeros(), gf = f.like_zeros();
        discriminator_loss_backward(r, f, variant, gr, gf);
        auto value = [&] { return discriminator_loss(r, f, variant); };
        CHECK(max_grad_rel_err(r, gr, value) < 1e-5);
        CHECK(max_grad_rel_err(f, gf, value) < 1e-5);
    }
}

TEST_CASE("perceptual loss: identity, determinism, naive oracle, gradient") {
    PerceptualConfig pcfg;
    pcfg.level_channels = {4, 8};
    pcfg.level_weights = {1.0, 0.5};
    PerceptualExtractor<double> ext(pcfg);

    Rng rng(23);
    Tensor<double> x(1, 3, 8, 8), y(1, 3, 8, 8);
    for (auto& v : x.v) v = rng.u01();
    for (auto& v : y.v) v = rng.u01();

    CHECK(ext.loss(x, x) == 0.0);

    // identical seed -> identical features and loss, bit-stable
    PerceptualExtractor<double> ext2(pcfg);
    CHECK(ext.loss(x, y) == ext2.loss(x, y));

    // naive per-level reduction over the extractor's own features
    auto fx = ext.features(x);
    auto fy = ext.features(y);
    double naive = 0;
    for (size_t l = 0; l < fx.size(); ++l) {
        double s = 0;
        for (size_t i = 0; i < fx[l].v.size(); ++i) s += std::abs(fx[l].v[i] - fy[l].v[i]);
        naive += pcfg.level_weights[l] * s / fx[l].numel();
    }
    CHECK(std::abs(naive - ext.loss(x, y)) < 1e-6);

    Tensor<double> g = y.like_zeros();
    double lv = ext.loss_backward(x, y, 1.0, g);
    CHECK(lv == doctest::Approx(ext.loss(x, y)));
    auto value = [&] { return ext.loss(x, y); };
    // |.| kinks make fd noisy only exactly at zero crossings; random data avoids them
    CHECK(max_grad_rel_err(y, g, value) < 1e-4);

    Tensor<double> bad(1, 3, 8, 9);
    CHECK_THROWS_AS(ext.loss(x, bad), ShapeError);
}

TEST_CASE("degenerate single-level identity-like check via conv oracle") {
    // with one level the loss reduces to mean |phi(x) - phi(y)| for that level
    PerceptualConfig pcfg;
    pcfg.level_channels = {4};
    pcfg.level_weights = {1.0};
    PerceptualExtractor<double> ext(pcfg);
    Rng rng(29);
    Tensor<double> x(1, 3, 8, 8), y(1, 3, 8, 8);
    for (auto& v : x.v) v = rng.u01();
    for (auto& v : y.v) v = rng.u01();
    auto fx = ext.features(x);
    auto fy = ext.features(y);
    double mae = 0;
    for (size_t i = 0; i < fx[0].v.size(); ++i) mae += std::abs(fx[0].v[i] - fy[0].v[i]);
    mae /= fx[0].numel();
    CHECK(ext.loss(x, y) == doctest::Approx(mae));
}

TEST_CASE("total_loss combines components with the configured weights") {
    LossWeights w;  // defaults: 1e-4, 1.0, 0.01, 0.1
    CHECK(w.lambda_kl == doctest::Approx(1e-4));
    CHECK(w.lambda_recon == doctest::Approx(1.0));
    CHECK(w.lambda_adv == doctest::Approx(0.01));
    CHECK(w.lambda_perc == doctest::Approx(0.1));

    LossComponents zero;
    CHECK(total_loss(zero, w).total == 0.0);

    LossComponents ones{1, 1, 1, 1};
    CHECK(total_loss(ones, w).total == doctest::Approx(1.1101));

    LossComponents bad{1, std::numeric_limits<double>::quiet_NaN(), 1, 1};
    CHECK_THROWS_WITH_AS(total_loss(bad, w), "non-finite loss component: recon",
                         DivergenceError);

    auto b = total_loss(ones, w);
    CHECK(b.total == b.recompute_total(w));
}

TEST_CASE("losses are permutation-invariant over batch order") {
    Rng rng(31);
    Tensor<double> x(4, 3, 6, 6), y(4, 3, 6, 6);
    for (auto& v : x.v) v = rng.u01();
    for (auto& v : y.v) v = rng.u01();

    auto permute = [](const Tensor<double>& t, const std::vector<int>& order) {
        Tensor<double> out(t.n, t.c, t.h, t.w);
        for (int i = 0; i < t.n; ++i)
            std::copy(t.plane(order[i], 0), t.plane(order[i], 0) + (size_t)t.c * t.h * t.w,
                      out.plane(i, 0));
        return out;
    };
    std::vector<int> order = {2, 0, 3, 1};
    auto xp = permute(x, order);
    auto yp = permute(y, order);

    CHECK(recon_loss(x, y) == doctest::Approx(recon_loss(xp, yp)).epsilon(1e-12));
    CHECK(adv_generator_loss(y, AdvVariant::non_saturating) ==
          doctest::Approx(adv_generator_loss(yp, AdvVariant::non_saturating)).epsilon(1e-12));

    LatentDistribution<double> d{x, y};
    LatentDistribution<double> dp{xp, yp};
    CHECK(kl_loss(d) == doctest::Approx(kl_loss(dp)).epsilon(1e-12));

    PerceptualConfig pcfg;
    pcfg.level_channels = {4};
    pcfg.level_weights = {1.0};
    PerceptualExtractor<double> ext(pcfg);
    CHECK(ext.loss(x, y) == doctest::Approx(ext.loss(xp, yp)).epsilon(1e-12));
}

TEST_CASE("patch discriminator: output map follows conv arithmetic on 3 sizes") {
    DiscConfig dcfg;
    dcfg.base_channels = 16;
    dcfg.group_norm_groups = 4;
    PatchDiscriminator<float> disc(dcfg, 33);
    // three stride-2 4x4 convs (pad 1) then one stride-1 4x4 conv (pad 1)
    auto expect = [](int s) { return s / 8 - 1; };
    for (int size : {32, 64, 48}) {
        Tensor<float> x(1, 3, size, size, 0.5f);
        auto logits = disc.forward(x);
        CHECK(logits.c == 1);
        CHECK(logits.h == expect(size));
        CHECK(logits.w == expect(size));
    }
}

TEST_CASE("patch discriminator gradients match finite differences") {
    DiscConfig dcfg;
    dcfg.base_channels = 4;
    dcfg.layers = 3;
    dcfg.group_norm_groups = 2;
    PatchDiscriminator<double> disc(dcfg, 35);
    Rng rng(37);
    Tensor<double> x(1, 3, 16, 16);
    x.fill_normal(rng, 0.5);
    auto y0 = disc.forward(x);
    auto w = projection_weights(y0.n, y0.c, y0.h, y0.w, 39);
    auto value = [&] { return project(disc.forward(x), w); };
    disc.zero_grads();
    disc.forward(x);
    Tensor<double> gx = disc.backward(w);
    CHECK(max_param_grad_rel_err(disc.params(), value) < 1e-5);
    CHECK(max_grad_rel_err(x, gx, value) < 1e-5);

    // input-grad-only mode must leave parameter grads untouched
    disc.zero_grads();
    disc.forward(x);
    Tensor<double> gx2 = disc.backward(w, /*accumulate_param_grads=*/false);
    CHECK(gx2.v == gx.v);
    for (auto* p : disc.params())
        for (auto g : p->g.v) CHECK(g == 0.0);
}
