#include <doctest.h>

#include "vivat/data/synth.hpp"
#include "vivat/metrics.hpp"

using namespace vivat;

TEST_CASE("psnr analytic cases") {
    Image x(1, 3, 16, 16, 0.0f);
    Image same = x;
    CHECK(psnr(x, same) == 100.0);  // zero-MSE cap

    Image half(1, 3, 16, 16, 0.5f);
    CHECK(psnr(x, half) == doctest::Approx(6.0206).epsilon(1e-4));

    Image one(1, 3, 16, 16, 1.0f);
    CHECK(psnr(x, one) == doctest::Approx(0.0).epsilon(1e-9));  // MSE = max^2

    Image bad(1, 3, 16, 17, 0.f);
    CHECK_THROWS_AS(psnr(x, bad), ShapeError);
}

TEST_CASE("ssim analytic cases") {
    SynthConfig cfg;
    cfg.size = 32;
    cfg.seed = 5;
    auto img = synth_texture(cfg, 0);
    CHECK(ssim(img, img) == 1.0);  // exact

    Image a(1, 3, 16, 16, 0.0f), b(1, 3, 16, 16, 1.0f);
    const double c1 = 1e-4;
    CHECK(ssim(a, b) == doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-9));

    Image small(1, 3, 8, 8, 0.f);
    CHECK_THROWS_AS(ssim(small, small, 11), ValidationError);
}

TEST_CASE("ssim matches the independent direct-loop reference") {
    SynthConfig cfg;
    cfg.size = 24;
    cfg.seed = 11;
    Rng rng(13);
    for (int t = 0; t < 8; ++t) {
        auto x = synth_texture(cfg, 2 * t);
        auto y = synth_texture(cfg, 2 * t + 1);
        // mix in some correlation so values span a range
        for (size_t i = 0; i < y.v.size(); ++i)
            y.v[i] = 0.5f * y.v[i] + 0.5f * x.v[i];
        CHECK(std::abs(ssim(x, y) - ssim_reference(x, y)) < 1e-5);
        CHECK(ssim(x, y) <= 1.0);
    }
}

TEST_CASE("psnr and ssim are symmetric in their arguments") {
    SynthConfig cfg;
    cfg.size = 24;
    cfg.seed = 17;
    auto x = synth_texture(cfg, 0);
    auto y = synth_texture(cfg, 1);
    CHECK(std::abs(psnr(x, y) - psnr(y, x)) < 1e-9);
    CHECK(std::abs(ssim(x, y) - ssim(y, x)) < 1e-9);
}

TEST_CASE("evaluate with the identity stub and aggregate recomputation") {
    DatasetSource src;
    src.kind = DatasetSource::Kind::synthetic;
    src.count = 5;
    src.synth.seed = 19;
    PreprocessSpec spec;
    spec.crop_size = 24;
    spec.intermediate_short_side = 24;
    Dataset ds(src, spec);

    IdentityReconstructor ident;
    auto rep = evaluate(ident, ds, {});
    CHECK(rep.count == 5);
    CHECK(rep.psnr_mean == 100.0);
    CHECK(rep.ssim_mean == 1.0);

    // determinism
    auto rep2 = evaluate(ident, ds, {});
    CHECK(rep.psnr_mean == rep2.psnr_mean);
    for (size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(rep.rows[i].psnr == rep2.rows[i].psnr);
        CHECK(rep.rows[i].ssim == rep2.rows[i].ssim);
    }

    // aggregates equal recomputation from stored rows
    double mean = 0;
    for (const auto& r : rep.rows) mean += r.psnr;
    mean /= rep.rows.size();
    CHECK(rep.psnr_mean == mean);

    DatasetSource empty = src;
    empty.count = 0;
    CHECK_THROWS_AS(Dataset(empty, spec), ConfigError);
}
