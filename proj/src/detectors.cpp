#include "vivat/diagnostics/detectors.hpp"

#include <algorithm>
#include <cmath>

#include "vivat/diagnostics/fft.hpp"

namespace vivat {

namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

std::vector<double> luma(const Image& img) {
    std::vector<double> out(static_cast<size_t>(img.h) * img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            out[static_cast<size_t>(y) * img.w + x] = kLumaR * img.at(0, 0, y, x) +
                                                      kLumaG * img.at(0, 1, y, x) +
                                                      kLumaB * img.at(0, 2, y, x);
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0;
    size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

// mean |x - xhat| over channels, per pixel
std::vector<double> abs_residual(const Image& x, const Image& xhat) {
    std::vector<double> out(static_cast<size_t>(x.h) * x.w, 0.0);
    for (int ci = 0; ci < x.c; ++ci)
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx)
                out[static_cast<size_t>(y) * x.w + xx] +=
                    std::abs(static_cast<double>(x.at(0, ci, y, xx)) - xhat.at(0, ci, y, xx));
    for (auto& v : out) v /= x.c;
    return out;
}

}  // namespace

ColorShiftResult detect_color_shift(const Image& x, const Image& xhat, double threshold) {
    x.require_same_shape(xhat, "detect_color_shift");
    ColorShiftResult r;
    r.threshold = threshold;
    const size_t hw = static_cast<size_t>(x.h) * x.w;
    for (int ci = 0; ci < 3; ++ci) {
        double sx = 0, sy = 0;
        const float* px = x.plane(0, ci);
        const float* py = xhat.plane(0, ci);
        for (size_t i = 0; i < hw; ++i) {
            sx += px[i];
            sy += py[i];
        }
        r.shift[ci] = (sy - sx) / static_cast<double>(hw);
        if (std::abs(r.shift[ci]) > r.score) {
            r.score = std::abs(r.shift[ci]);
            r.dominant_channel = ci;
        }
    }
    r.flag = r.score > threshold;
    return r;
}

GridResult detect_grid(const Image& x, const Image& xhat, int downscale_f, double threshold) {
    x.require_same_shape(xhat, "detect_grid");
    if (downscale_f < 2) throw ValidationError("detect_grid: downscale factor must be >= 2");
    if (x.h < 2 * downscale_f || x.w < 2 * downscale_f)
        throw ValidationError("detect_grid: image smaller than 2f");
    GridResult r;
    r.threshold = threshold;

    // luma residual, mean removed
    auto lx = luma(x);
    auto ly = luma(xhat);
    std::vector<double> res(lx.size());
    double mean = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        res[i] = ly[i] - lx[i];
        mean += res[i];
    }
    mean /= static_cast<double>(res.size());
    for (auto& v : res) v -= mean;

    auto power = fft2_power(res, x.h, x.w);
    const int h = x.h, w = x.w;

    // candidate bins: harmonics of the f-periodic grid along each axis and
    // their diagonal combinations, +-1 bin, stored with the harmonic order so
    // the detected period can be reported from the argmax
    struct Peak {
        int u, v, mu, mv;
    };
    std::vector<Peak> peaks;
    const int mmax_u = downscale_f / 2, mmax_v = downscale_f / 2;
    auto add_peak = [&](int mu, int mv) {
        const double fu = static_cast<double>(mu) * h / downscale_f;
        const double fv = static_cast<double>(mv) * w / downscale_f;
        const int bu = static_cast<int>(std::lround(fu));
        const int bv = static_cast<int>(std::lround(fv));
        for (int du = -1; du <= 1; ++du)
            for (int dv = -1; dv <= 1; ++dv) {
                int u = bu + du, v = bv + dv;
                if (u < 0 || v < 0 || u > h / 2 || v > w / 2) continue;
                if (u <= 2 && v <= 2) continue;  // keep clear of DC
                peaks.push_back({u, v, mu, mv});
            }
    };
    for (int m = 1; m <= mmax_u; ++m) add_peak(m, 0);
    for (int m = 1; m <= mmax_v; ++m) add_peak(0, m);
    for (int mu = 1; mu <= mmax_u; ++mu)
        for (int mv = 1; mv <= mmax_v; ++mv) add_peak(mu, mv);

    std::vector<uint8_t> is_peak(static_cast<size_t>(h) * w, 0);
    auto mark = [&](int u, int v) {
        is_peak[static_cast<size_t>(((u % h) + h) % h) * w + (((v % w) + w) % w)] = 1;
    };
    for (const auto& p : peaks) {
        mark(p.u, p.v);
        mark(h - p.u, p.v);
        mark(p.u, w - p.v);
        mark(h - p.u, w - p.v);
    }

    double peak_power = 0;
    Peak best{0, 0, 0, 0};
    for (const auto& p : peaks) {
        double pw = power[static_cast<size_t>(p.u) * w + p.v];
        if (pw > peak_power) {
            peak_power = pw;
            best = p;
        }
    }

    std::vector<double> off_peak;
    off_peak.reserve(power.size());
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            int fu = std::min(u, h - u), fv = std::min(v, w - v);
            if (fu <= 2 && fv <= 2) continue;  // DC neighborhood
            if (is_peak[static_cast<size_t>(u) * w + v]) continue;
            off_peak.push_back(power[static_cast<size_t>(u) * w + v]);
        }
    double med = median_of(std::move(off_peak));

    if (peak_power <= 0) {
        r.score = 0;
    } else if (med <= 0) {
        r.score = 1e6;  // structured residual on an otherwise empty spectrum
    } else {
        // capped: a noiseless periodic residual would otherwise divide by the
        // fp dust left in the off-peak bins
        r.score = std::min(peak_power / med, 1e6);
    }
    if (best.mu > 0 && best.u > 0)
        r.period = static_cast<int>(std::lround(static_cast<double>(best.mu) * h / best.u));
    else if (best.mv > 0 && best.v > 0)
        r.period = static_cast<int>(std::lround(static_cast<double>(best.mv) * w / best.v));
    r.flag = r.score > threshold;
    return r;
}

BlurResult detect_blur(const Image& x, const Image& xhat, double cutoff, double threshold) {
    x.require_same_shape(xhat, "detect_blur");
    BlurResult r;
    r.threshold = threshold;
    r.cutoff = cutoff;
    auto px = fft2_power(luma(x), x.h, x.w);
    auto py = fft2_power(luma(xhat), x.h, x.w);
    double hx = 0, hy = 0, total_x = 0;
    const int h = x.h, w = x.w;
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            const double fu = static_cast<double>(std::min(u, h - u)) / h;
            const double fv = static_cast<double>(std::min(v, w - v)) / w;
            const double freq = std::sqrt(fu * fu + fv * fv);
            const size_t i = static_cast<size_t>(u) * w + v;
            total_x += px[i];
            if (freq > cutoff) {
                hx += px[i];
                hy += py[i];
            }
        }
    if (hx <= 1e-12 * std::max(total_x, 1.0)) {
        r.applicable = false;
        r.ratio = 0;
        r.flag = false;
        return r;
    }
    r.ratio = hy / hx;
    r.flag = r.ratio < threshold;
    return r;
}

CornerResult detect_corner(const Image& x, const Image& xhat, int band, double threshold) {
    x.require_same_shape(xhat, "detect_corner");
    if (band < 1 || band >= std::min(x.h, x.w) / 4)
        throw ValidationError("detect_corner: band must be in [1, min(H,W)/4)");
    CornerResult r;
    r.threshold = threshold;
    r.band = band;
    auto res = abs_residual(x, xhat);
    double border = 0, interior = 0;
    size_t nb = 0, ni = 0;
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) {
            const int d = std::min({y, xx, x.h - 1 - y, x.w - 1 - xx});
            if (d < band) {
                border += res[static_cast<size_t>(y) * x.w + xx];
                ++nb;
            } else {
                interior += res[static_cast<size_t>(y) * x.w + xx];
                ++ni;
            }
        }
    if (ni == 0) throw ValidationError("detect_corner: degenerate interior");
    border /= static_cast<double>(nb);
    interior /= static_cast<double>(ni);
    if (border == 0 && interior == 0)
        r.ratio = 1.0;  // zero-residual convention
    else if (interior == 0)
        r.ratio = 1e6;
    else
        r.ratio = std::min(border / interior, 1e6);
    r.flag = r.ratio > threshold;
    return r;
}

DropletResult detect_droplet(const Image& x, const Image& xhat, int window, double threshold) {
    x.require_same_shape(xhat, "detect_droplet");
    if (window < 1 || window > std::min(x.h, x.w))
        throw ValidationError("detect_droplet: bad window");
    DropletResult r;
    r.threshold = threshold;
    r.window = window;
    auto res = abs_residual(x, xhat);

    // sliding window means via a summed-area table
    const int h = x.h, w = x.w;
    std::vector<double> sat(static_cast<size_t>(h + 1) * (w + 1), 0.0);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            sat[static_cast<size_t>(y + 1) * (w + 1) + xx + 1] =
                res[static_cast<size_t>(y) * w + xx] +
                sat[static_cast<size_t>(y) * (w + 1) + xx + 1] +
                sat[static_cast<size_t>(y + 1) * (w + 1) + xx] -
                sat[static_cast<size_t>(y) * (w + 1) + xx];
    const int oh = h - window + 1, ow = w - window + 1;
    std::vector<double> wm(static_cast<size_t>(oh) * ow);
    const double inv = 1.0 / (static_cast<double>(window) * window);
    for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
            double s = sat[static_cast<size_t>(y + window) * (w + 1) + xx + window] -
                       sat[static_cast<size_t>(y) * (w + 1) + xx + window] -
                       sat[static_cast<size_t>(y + window) * (w + 1) + xx] +
                       sat[static_cast<size_t>(y) * (w + 1) + xx];
            wm[static_cast<size_t>(y) * ow + xx] = s * inv;
        }

    double med = median_of(wm);
    std::vector<double> dev(wm.size());
    for (size_t i = 0; i < wm.size(); ++i) dev[i] = std::abs(wm[i] - med);
    double mad = median_of(std::move(dev)) * 1.4826;

    double max_wm = *std::max_element(wm.begin(), wm.end());
    double scale = mad;
    if (mad == 0) {
        if (max_wm == med) {
            r.score = 0;  // perfectly flat residual field
            return r;
        }
        r.mad_fallback = true;
        double mean = 0, var = 0;
        for (double v : wm) mean += v;
        mean /= static_cast<double>(wm.size());
        for (double v : wm) var += (v - mean) * (v - mean);
        scale = std::sqrt(var / static_cast<double>(wm.size()));
        med = mean;
        if (scale == 0) {
            r.score = 0;
            return r;
        }
    }
    for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
            double z = (wm[static_cast<size_t>(y) * ow + xx] - med) / scale;
            if (z > r.score) {
                r.score = z;
                r.loc_y = y + window / 2;
                r.loc_x = xx + window / 2;
            }
        }
    r.flag = r.score > threshold;
    return r;
}

ArtifactReport diagnose(const Image& x, const Image& xhat, int downscale_f,
                        const DetectorThresholds& thr) {
    ArtifactReport rep;
    rep.thresholds = thr;
    rep.color_shift = detect_color_shift(x, xhat, thr.color_shift);
    rep.grid = detect_grid(x, xhat, downscale_f, thr.grid);
    rep.blur = detect_blur(x, xhat, thr.blur_cutoff, thr.blur);
    rep.corner = detect_corner(x, xhat, thr.corner_band, thr.corner);
    rep.droplet = detect_droplet(x, xhat, thr.droplet_window, thr.droplet);
    return rep;
}

NormStats norm_stats(const ActivationTrace& trace) {
    if (trace.empty()) throw ValidationError("norm_stats: empty trace");
    NormStats out;
    for (const auto& [name, map] : trace.layers) {
        NormStats::Layer layer;
        layer.name = name;
        std::vector<double> vals(map.v.begin(), map.v.end());
        double mx = -1;
        size_t argmax = 0;
        for (size_t i = 0; i < vals.size(); ++i)
            if (vals[i] > mx) {
                mx = vals[i];
                argmax = i;
            }
        layer.max_norm = mx;
        layer.median_norm = median_of(vals);
        layer.outlier_ratio = layer.median_norm > 0 ? mx / layer.median_norm
                                                    : (mx > 0 ? 1e6 : 1.0);
        const size_t hw = static_cast<size_t>(map.h) * map.w;
        layer.argmax_item = static_cast<int>(argmax / hw);
        layer.argmax_y = static_cast<int>((argmax % hw) / map.w);
        layer.argmax_x = static_cast<int>(argmax % map.w);
        out.layers.push_back(std::move(layer));
    }
    return out;
}

void to_json(nlohmann::json& j, const DetectorThresholds& t) {
    j = nlohmann::json{{"color_shift", t.color_shift},   {"grid", t.grid},
                       {"blur", t.blur},                 {"blur_cutoff", t.blur_cutoff},
                       {"corner", t.corner},             {"corner_band", t.corner_band},
                       {"droplet", t.droplet},           {"droplet_window", t.droplet_window}};
}

void from_json(const nlohmann::json& j, DetectorThresholds& t) {
    j.at("color_shift").get_to(t.color_shift);
    j.at("grid").get_to(t.grid);
    j.at("blur").get_to(t.blur);
    j.at("blur_cutoff").get_to(t.blur_cutoff);
    j.at("corner").get_to(t.corner);
    j.at("corner_band").get_to(t.corner_band);
    j.at("droplet").get_to(t.droplet);
    j.at("droplet_window").get_to(t.droplet_window);
}

void to_json(nlohmann::json& j, const ArtifactReport& r) {
    j = nlohmann::json{
        {"color_shift",
         {{"shift", {r.color_shift.shift[0], r.color_shift.shift[1], r.color_shift.shift[2]}},
          {"score", r.color_shift.score},
          {"dominant_channel", r.color_shift.dominant_channel},
          {"flag", r.color_shift.flag},
          {"threshold", r.color_shift.threshold}}},
        {"grid",
         {{"score", r.grid.score},
          {"period", r.grid.period},
          {"flag", r.grid.flag},
          {"threshold", r.grid.threshold}}},
        {"blur",
         {{"ratio", r.blur.ratio},
          {"flag", r.blur.flag},
          {"applicable", r.blur.applicable},
          {"threshold", r.blur.threshold},
          {"cutoff", r.blur.cutoff}}},
        {"corner",
         {{"ratio", r.corner.ratio},
          {"flag", r.corner.flag},
          {"threshold", r.corner.threshold},
          {"band", r.corner.band}}},
        {"droplet",
         {{"score", r.droplet.score},
          {"location", {r.droplet.loc_y, r.droplet.loc_x}},
          {"flag", r.droplet.flag},
          {"mad_fallback", r.droplet.mad_fallback},
          {"threshold", r.droplet.threshold},
          {"window", r.droplet.window}}},
        {"thresholds", r.thresholds}};
}

void to_json(nlohmann::json& j, const NormStats& s) {
    j = nlohmann::json::array();
    for (const auto& l : s.layers)
        j.push_back({{"layer", l.name},
                     {"max_norm", l.max_norm},
                     {"median_norm", l.median_norm},
                     {"outlier_ratio", l.outlier_ratio},
                     {"argmax", {l.argmax_item, l.argmax_y, l.argmax_x}}});
}

}  // namespace vivat
