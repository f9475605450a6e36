#include <doctest.h>

#include "vivat/cli/config.hpp"
#include "vivat/diagnostics/ab.hpp"

using namespace vivat;

TEST_CASE("kv config parses sections, comments, arrays and quotes") {
    auto kv = KvConfig::parse_text(R"(
# a comment
top = 1
[model]
base_channels = 64          # trailing comment
channel_multipliers = [1, 2, 4]
padding_policy = "reflect"
[train]
learning_rate = 1e-4
max_steps = 500
)");
    CHECK(kv.get_int("top", 0) == 1);
    CHECK(kv.get_int("model.base_channels", 0) == 64);
    CHECK(kv.get_int_list("model.channel_multipliers", {}) == std::vector<int>{1, 2, 4});
    CHECK(kv.get_string("model.padding_policy", "") == "reflect");
    CHECK(kv.get_double("train.learning_rate", 0) == doctest::Approx(1e-4));
    CHECK(kv.get_int("train.max_steps", 0) == 500);
    CHECK(kv.get_string("missing.key", "fallback") == "fallback");

    CHECK_THROWS_AS(KvConfig::parse_text("key_without_value\n"), ConfigError);
    CHECK_THROWS_AS(KvConfig::parse_text("[broken\n"), ConfigError);
}

TEST_CASE("dotted overrides take precedence") {
    auto kv = KvConfig::parse_text("[train]\nmax_steps = 500\n");
    kv.apply_override("train.max_steps=10");
    CHECK(kv.get_int("train.max_steps", 0) == 10);
    CHECK_THROWS_AS(kv.apply_override("no_equals_sign"), ConfigError);
}

TEST_CASE("presets carry the documented defaults") {
    RunConfig vivat = run_config_from(preset_config("vivat"));
    CHECK(vivat.model.padding_policy == PadPolicy::reflect);
    CHECK(vivat.model.decoder_norm == NormKind::scn);
    CHECK(vivat.model.latent_channels == 16);
    CHECK(vivat.train.learning_rate == doctest::Approx(1e-4));
    CHECK(vivat.train.ema_decay == doctest::Approx(0.9999));
    CHECK(vivat.train.disc_start_step == 0);
    CHECK(vivat.train.weights.lambda_kl == doctest::Approx(1e-4));
    CHECK(vivat.train.weights.lambda_recon == doctest::Approx(1.0));
    CHECK(vivat.train.weights.lambda_adv == doctest::Approx(0.01));
    CHECK(vivat.train.weights.lambda_perc == doctest::Approx(0.1));

    RunConfig baseline = run_config_from(preset_config("baseline"));
    CHECK(baseline.model.padding_policy == PadPolicy::zero);
    CHECK(baseline.model.decoder_norm == NormKind::group_norm);
    CHECK(baseline.train.weights.lambda_kl == doctest::Approx(1e-3));
    CHECK(baseline.train.weights.lambda_adv == doctest::Approx(0.1));

    CHECK_THROWS_AS(preset_config("nonsense"), ConfigError);
}

TEST_CASE("run config validation names the missing field") {
    auto kv = preset_config("vivat");
    kv.set("data.kind", "\"directory\"");  // no data.root
    try {
        run_config_from(kv);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("data.root") != std::string::npos);
    }

    auto kv2 = preset_config("vivat");
    kv2.set("data.crop_size", "30");  // not a multiple of f=8
    CHECK_THROWS_AS(run_config_from(kv2), ConfigError);
}

TEST_CASE("run config round-trips through its TOML dump") {
    auto kv = preset_config("vivat");
    kv.set("model.base_channels", "32");
    kv.set("model.channel_multipliers", "[1, 2]");
    kv.set("model.downscale_factor", "2");
    kv.set("model.group_norm_groups", "8");
    kv.set("data.crop_size", "32");
    kv.set("data.intermediate_short_side", "64");
    kv.set("train.seed", "77");
    RunConfig rc = run_config_from(kv);
    RunConfig back = run_config_from(KvConfig::parse_text(rc.dump_toml()));
    CHECK(back.model.base_channels == rc.model.base_channels);
    CHECK(back.model.padding_policy == rc.model.padding_policy);
    CHECK(back.train.seed == rc.train.seed);
    CHECK(back.train.weights.lambda_adv == rc.train.weights.lambda_adv);
    CHECK(back.data.shuffle_seed == rc.data.shuffle_seed);
    CHECK(back.preprocess.crop_size == rc.preprocess.crop_size);
    CHECK(back.detect.grid == rc.detect.grid);
}

TEST_CASE("ab_compare rejects diffs outside the declared axes") {
    ModelConfig ma;
    ma.base_channels = 16;
    ma.channel_multipliers = {1, 1};
    ma.downscale_factor = 2;
    ma.latent_channels = 4;
    ma.attention_levels = {1};
    ma.group_norm_groups = 4;
    ma.blocks_per_level = 1;
    ModelConfig mb = ma;
    TrainConfig ta, tb;

    CHECK_NOTHROW(check_ablation_axes(ma, ta, mb, tb, default_ablation_axes()));

    mb.padding_policy = PadPolicy::zero;  // an allowed axis
    ma.padding_policy = PadPolicy::reflect;
    CHECK_NOTHROW(check_ablation_axes(ma, ta, mb, tb, default_ablation_axes()));

    mb.base_channels = 32;  // not an axis
    try {
        check_ablation_axes(ma, ta, mb, tb, default_ablation_axes());
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("model.base_channels") != std::string::npos);
    }

    mb.base_channels = 16;
    tb.seed = 123;  // seeds must match too
    CHECK_THROWS_AS(check_ablation_axes(ma, ta, mb, tb, default_ablation_axes()),
                    ValidationError);
}

TEST_CASE("identical configs give an all-zero delta report") {
    ModelConfig mc;
    mc.base_channels = 8;
    mc.channel_multipliers = {1, 1};
    mc.downscale_factor = 2;
    mc.latent_channels = 4;
    mc.attention_levels = {1};
    mc.group_norm_groups = 4;
    mc.blocks_per_level = 1;
    TrainConfig tc;
    tc.batch_size = 2;
    tc.learning_rate = 1e-3;
    tc.disc.base_channels = 8;
    tc.disc.layers = 2;
    tc.disc.group_norm_groups = 4;
    tc.perceptual.level_channels = {4};
    tc.perceptual.level_weights = {1.0};

    DatasetSource src;
    src.kind = DatasetSource::Kind::synthetic;
    src.count = 8;
    src.synth.seed = 3;
    PreprocessSpec spec;
    spec.crop_size = 16;
    spec.intermediate_short_side = 16;
    Dataset data(src, spec);

    AbSpec ab;
    ab.steps = 3;
    ab.eval_images = 4;
    ab.downscale_f = 2;
    ab.probe_size = 16;
    auto rep = ab_compare<float>(mc, tc, mc, tc, data, ab);
    for (auto& [key, delta] : rep.deltas.items()) {
        INFO(key);
        CHECK(delta.get<double>() == 0.0);
    }
}
