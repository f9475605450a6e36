#include <doctest.h>

#include "vivat/data/preprocess.hpp"
#include "vivat/data/synth.hpp"
#include "vivat/diagnostics/detectors.hpp"
#include "vivat/diagnostics/probe.hpp"

using namespace vivat;

namespace {

Image texture(int size, uint64_t seed, uint64_t index = 0) {
    SynthConfig cfg;
    cfg.size = size;
    cfg.seed = seed;
    return synth_texture(cfg, index);
}

Image add_grid(const Image& img, int period, float amplitude) {
    Image out = img;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                if (y % period == 0 || x % period == 0) out.at(0, c, y, x) += amplitude;
    return out;
}

}  // namespace

TEST_CASE("color shift detector: identity, construction, naive oracle") {
    auto x = texture(64, 1);
    auto r0 = detect_color_shift(x, x, 0.02);
    CHECK(r0.score == 0.0);
    CHECK(!r0.flag);

    // mid-range texture shifted on channel 0
    Image shifted = x;
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
            shifted.at(0, 0, y, xx) =
                std::clamp(shifted.at(0, 0, y, xx) + 0.1f, 0.0f, 1.0f);
    auto r1 = detect_color_shift(x, shifted, 0.02);
    CHECK(r1.score == doctest::Approx(0.1).epsilon(0.15));
    CHECK(r1.dominant_channel == 0);
    CHECK(r1.flag);

    // naive per-channel loop oracle
    auto y2 = texture(64, 2);
    auto r2 = detect_color_shift(x, y2, 0.02);
    for (int c = 0; c < 3; ++c) {
        double mx = 0, my = 0;
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) {
                mx += x.at(0, c, y, xx);
                my += y2.at(0, c, y, xx);
            }
        CHECK(std::abs(r2.shift[c] - (my - mx) / (64.0 * 64.0)) < 1e-6);
    }
    CHECK(r2.flag == (r2.score > r2.threshold));  // flag recomputable
}

TEST_CASE("grid detector: identity, injection, period recovery, translation invariance") {
    auto x = texture(64, 3);
    auto clean = detect_grid(x, x, 8, 8.0);
    CHECK(clean.score == 0.0);
    CHECK(!clean.flag);

    auto gridded = add_grid(x, 8, 0.05f);
    auto hit = detect_grid(x, gridded, 8, 8.0);
    CHECK(hit.flag);
    CHECK(hit.period == 8);

    // translation invariance on realistic pairs: grid + broadband noise so
    // the off-peak floor is nonzero; phase shifts move the score < 5%
    auto noisy = [&](int dy, int dx) {
        Image out = x;
        Rng nrng(55);  // same noise field for both phases
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    float v = out.at(0, c, y, xx) + 0.01f * static_cast<float>(nrng.normal());
                    if ((y + dy) % 8 == 0 || (xx + dx) % 8 == 0) v += 0.05f;
                    out.at(0, c, y, xx) = v;
                }
        return out;
    };
    auto base = detect_grid(x, noisy(0, 0), 8, 8.0);
    auto moved = detect_grid(x, noisy(3, 5), 8, 8.0);
    CHECK(base.flag);
    CHECK(base.score < 1e6);  // healthy off-peak floor, not the cap
    CHECK(std::abs(moved.score - base.score) / base.score < 0.05);

    Image tiny(1, 3, 12, 12, 0.5f);
    CHECK_THROWS_AS(detect_grid(tiny, tiny, 8, 8.0), ValidationError);
}

TEST_CASE("blur detector: identity, gaussian blur, non-applicable case") {
    auto x = texture(64, 5);
    auto same = detect_blur(x, x, 0.125, 0.6);
    CHECK(same.ratio == doctest::Approx(1.0));
    CHECK(!same.flag);
    CHECK(same.applicable);

    auto blurred = gaussian_blur(x, 2.0);
    auto hit = detect_blur(x, blurred, 0.125, 0.6);
    CHECK(hit.ratio < 0.5);
    CHECK(hit.flag);

    Image flat(1, 3, 32, 32, 0.5f);
    auto na = detect_blur(flat, flat, 0.125, 0.6);
    CHECK(!na.applicable);
    CHECK(!na.flag);
}

TEST_CASE("corner detector: conventions and border construction") {
    auto x = texture(64, 7);
    auto same = detect_corner(x, x, 8, 2.0);
    CHECK(same.ratio == 1.0);  // zero-residual convention
    CHECK(!same.flag);

    // residual only on the border band
    Image border = x;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx)
                if (std::min({y, xx, x.h - 1 - y, x.w - 1 - xx}) < 8)
                    border.at(0, c, y, xx) += 0.1f;
    auto hit = detect_corner(x, border, 8, 2.0);
    CHECK(hit.ratio == 1e6);  // interior residual is exactly zero -> capped
    CHECK(hit.flag);

    CHECK_THROWS_AS(detect_corner(x, x, 20, 2.0), ValidationError);  // band >= min/4
}

TEST_CASE("droplet detector: identity, injected spot, localization") {
    auto x = texture(64, 9);
    auto same = detect_droplet(x, x, 8, 6.0);
    CHECK(same.score == 0.0);
    CHECK(!same.flag);

    Image spot = x;
    for (int c = 0; c < 3; ++c)
        for (int y = 30; y < 34; ++y)
            for (int xx = 40; xx < 44; ++xx)
                spot.at(0, c, y, xx) = std::clamp(spot.at(0, c, y, xx) + 0.5f, 0.0f, 1.0f);
    auto hit = detect_droplet(x, spot, 8, 6.0);
    CHECK(hit.flag);
    CHECK(std::abs(hit.loc_y - 32) <= 8);
    CHECK(std::abs(hit.loc_x - 42) <= 8);
}

TEST_CASE("norm_stats: uniform maps, synthetic outlier, ordering") {
    ActivationTrace trace;
    TensorF uniform(1, 1, 8, 8, 2.0f);
    trace.layers.emplace_back("layer0", uniform);
    TensorF spiky(1, 1, 8, 8, 1.0f);
    spiky.at(0, 0, 3, 5) = 10.0f;
    trace.layers.emplace_back("layer1", spiky);

    auto stats = norm_stats(trace);
    REQUIRE(stats.layers.size() == 2);
    CHECK(stats.layers[0].name == "layer0");
    CHECK(stats.layers[0].outlier_ratio == doctest::Approx(1.0));
    CHECK(stats.layers[1].outlier_ratio == doctest::Approx(10.0));
    CHECK(stats.layers[1].argmax_y == 3);
    CHECK(stats.layers[1].argmax_x == 5);
    CHECK(stats.max_outlier_ratio() == doctest::Approx(10.0));

    ActivationTrace empty;
    CHECK_THROWS_AS(norm_stats(empty), ValidationError);
}

TEST_CASE("diagnose produces a self-contained report") {
    auto x = texture(64, 11);
    auto y = gaussian_blur(x, 1.0);
    DetectorThresholds thr;
    auto rep = diagnose(x, y, 8, thr);
    CHECK(rep.color_shift.flag == (rep.color_shift.score > rep.color_shift.threshold));
    CHECK(rep.grid.flag == (rep.grid.score > rep.grid.threshold));
    CHECK(rep.blur.flag == (rep.blur.applicable && rep.blur.ratio < rep.blur.threshold));
    CHECK(rep.corner.flag == (rep.corner.ratio > rep.corner.threshold));
    CHECK(rep.droplet.flag == (rep.droplet.score > rep.droplet.threshold));

    nlohmann::json j = rep;
    CHECK(j["thresholds"]["grid"] == doctest::Approx(thr.grid));
    CHECK(j["blur"]["ratio"] == doctest::Approx(rep.blur.ratio));
}

TEST_CASE("identity reconstruction leaves every detector quiet") {
    auto x = texture(64, 13);
    DetectorThresholds thr;
    auto rep = diagnose(x, x, 8, thr);
    CHECK(!rep.color_shift.flag);
    CHECK(!rep.grid.flag);
    CHECK(!rep.blur.flag);
    CHECK(!rep.corner.flag);
    CHECK(!rep.droplet.flag);
}

TEST_CASE("detector scores ignore evaluation-set order") {
    DetectorThresholds thr;
    std::vector<double> scores;
    for (int order = 0; order < 2; ++order) {
        double sum = 0;
        for (int i = 0; i < 4; ++i) {
            int idx = order == 0 ? i : 3 - i;
            auto x = texture(48, 15, idx);
            auto y = gaussian_blur(x, 1.0);
            sum += detect_blur(x, y, thr.blur_cutoff, thr.blur).ratio;
        }
        scores.push_back(sum);
    }
    CHECK(scores[0] == doctest::Approx(scores[1]).epsilon(1e-12));
}

TEST_CASE("constant-input probe separates reflect from zero padding") {
    ModelConfig mc;
    mc.base_channels = 16;
    mc.channel_multipliers = {1, 1, 1};
    mc.downscale_factor = 4;
    mc.latent_channels = 8;
    mc.attention_levels = {2};
    mc.group_norm_groups = 4;
    mc.blocks_per_level = 1;

    mc.padding_policy = PadPolicy::reflect;
    mc.decoder_norm = NormKind::group_norm;
    VAEModel<float> reflect_model(mc, 99);
    auto reflect_stages = constant_input_probe(reflect_model, 32, 0.5f);
    REQUIRE(!reflect_stages.empty());
    for (const auto& st : reflect_stages) {
        CHECK(st.max_rel_deviation <= 1e-5);
        CHECK(st.border_ratio <= 1.0 + 1e-5);
    }

    mc.padding_policy = PadPolicy::zero;
    VAEModel<float> zero_model(mc, 99);
    auto zero_stages = constant_input_probe(zero_model, 32, 0.5f);
    double worst = 0;
    for (const auto& st : zero_stages) worst = std::max(worst, st.border_ratio);
    CHECK(worst > 1.1);
}
