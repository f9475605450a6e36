#pragma once

#include <json.hpp>

#include "vivat/data/dataset.hpp"
#include "vivat/tensor.hpp"

namespace vivat {

// 10*log10(max^2 / MSE); identical images return the 100 dB cap
double psnr(const Image& x, const Image& xhat, double max_value = 1.0);

// mean SSIM over sliding Gaussian windows (valid positions) and channels
double ssim(const Image& x, const Image& xhat, int window = 11, double sigma = 1.5,
            double max_value = 1.0);

// independent direct-loop reference used by the verification suites
double ssim_reference(const Image& x, const Image& xhat, int window = 11, double sigma = 1.5,
                      double max_value = 1.0);

struct MetricReport {
    struct Row {
        std::string name;
        double psnr = 0;
        double ssim = 0;
    };
    std::vector<Row> rows;
    double psnr_mean = 0, psnr_std = 0;
    double ssim_mean = 0, ssim_std = 0;
    int count = 0;
    int eval_size = 0;
    std::string model_id;
    std::string protocol = "proportional bicubic resize, center crop";

    void aggregate();
};

void to_json(nlohmann::json& j, const MetricReport& r);

// abstraction over "something that maps an image to a reconstruction";
// the identity stub and the EMA-weighted VAE both implement it
struct Reconstructor {
    virtual ~Reconstructor() = default;
    virtual Image reconstruct(const Image& x) = 0;
    virtual std::string id() const { return "reconstructor"; }
};

struct IdentityReconstructor final : Reconstructor {
    Image reconstruct(const Image& x) override { return x; }
    std::string id() const override { return "identity"; }
};

struct EvalSpec {
    int max_images = 0;  // 0: whole dataset
};

MetricReport evaluate(Reconstructor& model, const Dataset& dataset, const EvalSpec& spec);

}  // namespace vivat
