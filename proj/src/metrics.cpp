#include "vivat/metrics.hpp"

#include <cmath>

namespace vivat {

double psnr(const Image& x, const Image& xhat, double max_value) {
    x.require_same_shape(xhat, "psnr");
    if (!(max_value > 0)) throw ValidationError("psnr: max_value must be > 0");
    double mse = 0;
    for (size_t i = 0; i < x.v.size(); ++i) {
        double d = static_cast<double>(x.v[i]) - xhat.v[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.numel());
    if (mse == 0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(max_value * max_value / mse));
}

namespace {

std::vector<double> gaussian_kernel(int window, double sigma) {
    std::vector<double> k(window);
    const double c = (window - 1) / 2.0;
    double sum = 0;
    for (int i = 0; i < window; ++i) {
        k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// separable valid-mode gaussian filter of one channel plane
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& k) {
    const int win = static_cast<int>(k.size());
    const int oh = h - win + 1, ow = w - win + 1;
    std::vector<double> mid(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int i = 0; i < win; ++i) acc += k[i] * src[static_cast<size_t>(y) * w + x + i];
            mid[static_cast<size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int i = 0; i < win; ++i) acc += k[i] * mid[static_cast<size_t>(y + i) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace

double ssim(const Image& x, const Image& xhat, int window, double sigma, double max_value) {
    x.require_same_shape(xhat, "ssim");
    if (x.h < window || x.w < window)
        throw ValidationError("ssim: image " + x.shape_str() + " smaller than window " +
                              std::to_string(window));
    const double c1 = (0.01 * max_value) * (0.01 * max_value);
    const double c2 = (0.03 * max_value) * (0.03 * max_value);
    const auto k = gaussian_kernel(window, sigma);
    const size_t hw = static_cast<size_t>(x.h) * x.w;

    double total = 0;
    for (int ci = 0; ci < x.c; ++ci) {
        std::vector<double> a(hw), b(hw), aa(hw), bb(hw), ab(hw);
        const float* pa = x.plane(0, ci);
        const float* pb = xhat.plane(0, ci);
        for (size_t i = 0; i < hw; ++i) {
            a[i] = pa[i];
            b[i] = pb[i];
            aa[i] = a[i] * a[i];
            bb[i] = b[i] * b[i];
            ab[i] = a[i] * b[i];
        }
        auto ma = filter_valid(a, x.h, x.w, k);
        auto mb = filter_valid(b, x.h, x.w, k);
        auto maa = filter_valid(aa, x.h, x.w, k);
        auto mbb = filter_valid(bb, x.h, x.w, k);
        auto mab = filter_valid(ab, x.h, x.w, k);
        double acc = 0;
        for (size_t i = 0; i < ma.size(); ++i) {
            double va = maa[i] - ma[i] * ma[i];
            double vb = mbb[i] - mb[i] * mb[i];
            double cov = mab[i] - ma[i] * mb[i];
            acc += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) /
                   ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
        }
        total += acc / static_cast<double>(ma.size());
    }
    return total / x.c;
}

double ssim_reference(const Image& x, const Image& xhat, int window, double sigma,
                      double max_value) {
    x.require_same_shape(xhat, "ssim_reference");
    if (x.h < window || x.w < window) throw ValidationError("ssim_reference: window too large");
    const double c1 = (0.01 * max_value) * (0.01 * max_value);
    const double c2 = (0.03 * max_value) * (0.03 * max_value);
    const auto k = gaussian_kernel(window, sigma);

    double total = 0;
    for (int ci = 0; ci < x.c; ++ci) {
        double acc = 0;
        int windows = 0;
        for (int oy = 0; oy + window <= x.h; ++oy)
            for (int ox = 0; ox + window <= x.w; ++ox) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int dy = 0; dy < window; ++dy)
                    for (int dx = 0; dx < window; ++dx) {
                        double wgt = k[dy] * k[dx];
                        double va = x.at(0, ci, oy + dy, ox + dx);
                        double vb = xhat.at(0, ci, oy + dy, ox + dx);
                        ma += wgt * va;
                        mb += wgt * vb;
                        maa += wgt * va * va;
                        mbb += wgt * vb * vb;
                        mab += wgt * va * vb;
                    }
                double va = maa - ma * ma, vb = mbb - mb * mb, cov = mab - ma * mb;
                acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                       ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++windows;
            }
        total += acc / windows;
    }
    return total / x.c;
}

void MetricReport::aggregate() {
    count = static_cast<int>(rows.size());
    psnr_mean = psnr_std = ssim_mean = ssim_std = 0;
    if (rows.empty()) return;
    for (const auto& r : rows) {
        psnr_mean += r.psnr;
        ssim_mean += r.ssim;
    }
    psnr_mean /= count;
    ssim_mean /= count;
    for (const auto& r : rows) {
        psnr_std += (r.psnr - psnr_mean) * (r.psnr - psnr_mean);
        ssim_std += (r.ssim - ssim_mean) * (r.ssim - ssim_mean);
    }
    psnr_std = std::sqrt(psnr_std / count);
    ssim_std = std::sqrt(ssim_std / count);
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"name", row.name}, {"psnr", row.psnr}, {"ssim", row.ssim}});
    j = nlohmann::json{{"rows", rows},
                       {"psnr_mean", r.psnr_mean},
                       {"psnr_std", r.psnr_std},
                       {"ssim_mean", r.ssim_mean},
                       {"ssim_std", r.ssim_std},
                       {"count", r.count},
                       {"eval_size", r.eval_size},
                       {"model_id", r.model_id},
                       {"protocol", r.protocol}};
}

MetricReport evaluate(Reconstructor& model, const Dataset& dataset, const EvalSpec& spec) {
    if (dataset.size() == 0) throw ValidationError("evaluate: empty dataset");
    size_t count = dataset.size();
    if (spec.max_images > 0) count = std::min(count, static_cast<size_t>(spec.max_images));
    MetricReport report;
    report.eval_size = dataset.spec().crop_size;
    report.model_id = model.id();
    for (size_t i = 0; i < count; ++i) {
        Image x = dataset.item(i);
        Image xhat = model.reconstruct(x);
        report.rows.push_back({dataset.item_name(i), psnr(x, xhat), ssim(x, xhat)});
    }
    report.aggregate();
    return report;
}

}  // namespace vivat
