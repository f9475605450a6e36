#include <doctest.h>

#include "support/gradcheck.hpp"
#include "vivat/nn/blocks.hpp"
#include "vivat/nn/conv.hpp"
#include "vivat/nn/norm.hpp"
#include "vivat/nn/ops.hpp"

using namespace vivat;
using namespace vivat::testing;

TEST_CASE("pad2d reflect mirrors without repeating the edge") {
    Tensor<double> row(1, 1, 1, 3);
    row.v = {1, 2, 3};
    // width 1 reflect needs h > width; use a 3x3 so both dims qualify
    Tensor<double> x(1, 1, 3, 3);
    for (int y = 0; y < 3; ++y)
        for (int c = 0; c < 3; ++c) x.at(0, 0, y, c) = c + 1;
    auto p = pad2d(x, 1, PadPolicy::reflect);
    CHECK(p.h == 5);
    CHECK(p.w == 5);
    // middle row becomes [2,1,2,3,2]
    CHECK(p.at(0, 0, 2, 0) == 2);
    CHECK(p.at(0, 0, 2, 1) == 1);
    CHECK(p.at(0, 0, 2, 2) == 2);
    CHECK(p.at(0, 0, 2, 3) == 3);
    CHECK(p.at(0, 0, 2, 4) == 2);

    auto z = pad2d(x, 1, PadPolicy::zero);
    CHECK(z.at(0, 0, 2, 0) == 0);
    CHECK(z.at(0, 0, 2, 1) == 1);
    CHECK(z.at(0, 0, 0, 0) == 0);
}

TEST_CASE("pad2d constant map stays constant under reflect") {
    Tensor<double> x(1, 2, 4, 5, 0.7);
    for (int width : {1, 2, 3}) {
        auto p = pad2d(x, width, PadPolicy::reflect);
        for (auto v : p.v) CHECK(v == doctest::Approx(0.7));
        CHECK(p.h == 4 + 2 * width);
        CHECK(p.w == 5 + 2 * width);
    }
}

TEST_CASE("pad2d rejects reflect width >= dim and negative width") {
    Tensor<double> x(1, 1, 3, 3, 1.0);
    CHECK_THROWS_AS(pad2d(x, 3, PadPolicy::reflect), ValidationError);
    CHECK_THROWS_AS(pad2d(x, -1, PadPolicy::zero), ValidationError);
    CHECK_NOTHROW(pad2d(x, 3, PadPolicy::zero));
}

TEST_CASE("pad2d gradient scatters back to mirrored sources") {
    Rng rng(7);
    Tensor<double> x(1, 1, 4, 4);
    x.fill_normal(rng);
    for (auto policy : {PadPolicy::zero, PadPolicy::reflect}) {
        auto w = projection_weights(1, 1, 6, 6, 11);
        Tensor<double> analytic = pad2d_backward(w, 1, policy, 4, 4);
        auto value = [&] { return project(pad2d(x, 1, policy), w); };
        CHECK(max_grad_rel_err(x, analytic, value) < 1e-6);
    }
}

TEST_CASE("conv2d shapes follow the stride arithmetic") {
    Conv2d<float> c1("c", 3, 8, 3, 1, 1, PadPolicy::zero);
    CHECK(c1.out_dim(32) == 32);
    Conv2d<float> c2("c", 3, 8, 3, 2, 1, PadPolicy::zero);
    CHECK(c2.out_dim(32) == 16);
    Conv2d<float> c3("c", 3, 8, 4, 2, 1, PadPolicy::zero);
    CHECK(c3.out_dim(32) == 16);
    Conv2d<float> c4("c", 3, 8, 4, 1, 1, PadPolicy::zero);
    CHECK(c4.out_dim(32) == 31);
}

TEST_CASE("conv2d matches a naive direct convolution") {
    Rng rng(3);
    for (auto policy : {PadPolicy::zero, PadPolicy::reflect}) {
        for (int stride : {1, 2}) {
            Conv2d<double> conv("c", 2, 3, 3, stride, 1, policy);
            conv.init_params(rng);
            Tensor<double> x(2, 2, 6, 6);
            x.fill_normal(rng);
            auto y = conv.forward(x);
            auto xpad = pad2d(x, 1, policy);
            for (int i = 0; i < y.n; ++i)
                for (int co = 0; co < y.c; ++co)
                    for (int oy = 0; oy < y.h; ++oy)
                        for (int ox = 0; ox < y.w; ++ox) {
                            double acc = conv.bias.w.v[co];
                            for (int ci = 0; ci < 2; ++ci)
                                for (int dy = 0; dy < 3; ++dy)
                                    for (int dx = 0; dx < 3; ++dx)
                                        acc += conv.weight.w.at(co, ci, dy, dx) *
                                               xpad.at(i, ci, oy * stride + dy, ox * stride + dx);
                            CHECK(y.at(i, co, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
                        }
        }
    }
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(5);
    for (auto policy : {PadPolicy::zero, PadPolicy::reflect}) {
        for (int stride : {1, 2}) {
            Conv2d<double> conv("c", 2, 3, 3, stride, 1, policy);
            conv.init_params(rng);
            Tensor<double> x(1, 2, 4, 4);
            x.fill_normal(rng);
            auto y0 = conv.forward(x);
            auto w = projection_weights(y0.n, y0.c, y0.h, y0.w, 21);
            auto value = [&] { return project(conv.forward(x), w); };
            ParamRefs<double> ps;
            conv.collect(ps);
            zero_grads(ps);
            conv.forward(x);
            Tensor<double> gx = conv.backward(w);
            CHECK(max_param_grad_rel_err(ps, value) < 1e-6);
            CHECK(max_grad_rel_err(x, gx, value) < 1e-6);
        }
    }
}

TEST_CASE("group norm gradients and constancy") {
    Rng rng(9);
    GroupNorm<double> gn("gn", 4, 2);
    Tensor<double> x(2, 4, 3, 3);
    x.fill_normal(rng);
    auto y0 = gn.forward(x);
    auto w = projection_weights(y0.n, y0.c, y0.h, y0.w, 31);
    auto value = [&] { return project(gn.forward(x), w); };
    ParamRefs<double> ps;
    gn.collect(ps);
    zero_grads(ps);
    gn.forward(x);
    Tensor<double> gx = gn.backward(w);
    CHECK(max_param_grad_rel_err(ps, value) < 1e-5);
    CHECK(max_grad_rel_err(x, gx, value) < 1e-5);

    // constant input -> zero-variance group -> output equals the bias
    Tensor<double> c(1, 4, 5, 5, 0.3);
    auto yc = gn.forward(c);
    for (auto v : yc.v) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("scn equals plain group norm at init") {
    Rng rng(13);
    Scn<double> scn("scn", 8, 4, 4, PadPolicy::reflect);
    scn.init_params(rng);
    GroupNorm<double> gn("gn", 8, 4, /*affine=*/false);
    Tensor<double> h(2, 8, 6, 6);
    h.fill_normal(rng);
    Tensor<double> z(2, 4, 3, 3);
    z.fill_normal(rng);
    auto a = scn.forward(h, z);
    auto b = gn.forward(h);
    REQUIRE(a.same_shape(b));
    for (size_t i = 0; i < a.v.size(); ++i) CHECK(a.v[i] == b.v[i]);
}

TEST_CASE("scn preserves shape and validates the spatial ratio") {
    Rng rng(13);
    Scn<float> scn("scn", 16, 4, 4, PadPolicy::zero);
    scn.init_params(rng);
    Tensor<float> h(1, 16, 8, 8);
    h.fill_normal(rng);
    Tensor<float> z(1, 4, 4, 4);
    z.fill_normal(rng);
    auto y = scn.forward(h, z);
    CHECK(y.same_shape(h));

    Tensor<float> bad(1, 4, 3, 3);
    CHECK_THROWS_AS(scn.forward(h, bad), ValidationError);
}

TEST_CASE("scn gradients match finite differences") {
    Rng rng(17);
    Scn<double> scn("scn", 4, 2, 2, PadPolicy::reflect);
    scn.init_params(rng);
    // move modulation away from the zero init so its grads are exercised
    ParamRefs<double> ps;
    scn.collect(ps);
    for (auto* p : ps) p->w.fill_normal(rng, 0.2);
    Tensor<double> h(1, 4, 4, 4);
    h.fill_normal(rng);
    Tensor<double> z(1, 2, 2, 2);
    z.fill_normal(rng);
    auto y0 = scn.forward(h, z);
    auto w = projection_weights(y0.n, y0.c, y0.h, y0.w, 41);
    auto value = [&] { return project(scn.forward(h, z), w); };
    zero_grads(ps);
    scn.forward(h, z);
    Tensor<double> gz = z.like_zeros();
    Tensor<double> gh = scn.backward(w, gz);
    CHECK(max_param_grad_rel_err(ps, value) < 1e-5);
    CHECK(max_grad_rel_err(h, gh, value) < 1e-5);
    CHECK(max_grad_rel_err(z, gz, value) < 1e-5);
}

TEST_CASE("attention block gradients match finite differences") {
    Rng rng(19);
    AttnBlock<double> attn("attn", 4, NormKind::group_norm, 0, 2, PadPolicy::zero);
    attn.init_params(rng);
    Tensor<double> x(1, 4, 3, 3);
    x.fill_normal(rng);
    auto y0 = attn.forward(x);
    CHECK(y0.same_shape(x));
    auto w = projection_weights(y0.n, y0.c, y0.h, y0.w, 51);
    auto value = [&] { return project(attn.forward(x), w); };
    ParamRefs<double> ps;
    attn.collect(ps);
    zero_grads(ps);
    attn.forward(x);
    Tensor<double> gx = attn.backward(w);
    CHECK(max_param_grad_rel_err(ps, value) < 1e-5);
    CHECK(max_grad_rel_err(x, gx, value) < 1e-5);
}

TEST_CASE("resnet block gradients, both norms, including latent path") {
    Rng rng(23);
    for (auto norm : {NormKind::group_norm, NormKind::scn}) {
        ResnetBlock<double> block("rb", 4, 6, norm, 2, 2, PadPolicy::reflect);
        block.init_params(rng);
        ParamRefs<double> ps;
        block.collect(ps);
        // perturb away from the zero-init tail conv so all paths carry signal
        for (auto* p : ps)
            if (p->w.v.size() > 1 && p->w.v[0] == 0.0) p->w.fill_normal(rng, 0.1);
        Tensor<double> x(1, 4, 4, 4);
        x.fill_normal(rng);
        Tensor<double> z(1, 2, 2, 2);
        z.fill_normal(rng);
        const Tensor<double>* zp = norm == NormKind::scn ? &z : nullptr;
        auto y0 = block.forward(x, zp);
        auto w = projection_weights(y0.n, y0.c, y0.h, y0.w, 61);
        auto value = [&] { return project(block.forward(x, zp), w); };
        zero_grads(ps);
        block.forward(x, zp);
        Tensor<double> gz = z.like_zeros();
        Tensor<double> gx = block.backward(w, norm == NormKind::scn ? &gz : nullptr);
        CHECK(max_param_grad_rel_err(ps, value) < 1e-5);
        CHECK(max_grad_rel_err(x, gx, value) < 1e-5);
        if (norm == NormKind::scn) CHECK(max_grad_rel_err(z, gz, value) < 1e-5);
    }
}

TEST_CASE("upsample and downsample gradients") {
    Rng rng(29);
    Upsample<double> up("up", 3, PadPolicy::reflect);
    up.init_params(rng);
    Downsample<double> down("down", 3, PadPolicy::zero);
    down.init_params(rng);
    Tensor<double> x(1, 3, 4, 4);
    x.fill_normal(rng);

    auto yu = up.forward(x);
    CHECK(yu.h == 8);
    auto wu = projection_weights(yu.n, yu.c, yu.h, yu.w, 71);
    auto vu = [&] { return project(up.forward(x), wu); };
    ParamRefs<double> pu;
    up.collect(pu);
    zero_grads(pu);
    up.forward(x);
    auto gxu = up.backward(wu);
    CHECK(max_param_grad_rel_err(pu, vu) < 1e-6);
    CHECK(max_grad_rel_err(x, gxu, vu) < 1e-6);

    auto yd = down.forward(x);
    CHECK(yd.h == 2);
    auto wd = projection_weights(yd.n, yd.c, yd.h, yd.w, 73);
    auto vd = [&] { return project(down.forward(x), wd); };
    ParamRefs<double> pd;
    down.collect(pd);
    zero_grads(pd);
    down.forward(x);
    auto gxd = down.backward(wd);
    CHECK(max_param_grad_rel_err(pd, vd) < 1e-6);
    CHECK(max_grad_rel_err(x, gxd, vd) < 1e-6);
}

TEST_CASE("silu gradient") {
    Rng rng(31);
    SiLU<double> act;
    Tensor<double> x(1, 2, 3, 3);
    x.fill_normal(rng);
    auto y0 = act.forward(x);
    auto w = projection_weights(y0.n, y0.c, y0.h, y0.w, 81);
    auto value = [&] { return project(act.forward(x), w); };
    act.forward(x);
    auto gx = act.backward(w);
    CHECK(max_grad_rel_err(x, gx, value) < 1e-7);
}
