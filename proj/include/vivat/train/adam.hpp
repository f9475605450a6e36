#pragma once

#include "vivat/nn/param.hpp"

namespace vivat {

// Adam, beta = (0.9, 0.999), eps = 1e-8, constant learning rate, no weight
// decay. Frozen params are skipped entirely: values and moments stay put.
template <class T>
class Adam {
public:
    Adam() = default;
    explicit Adam(double lr) : lr_(lr) {}

    void attach(const ParamRefs<T>& ps) {
        m_.clear();
        v_.clear();
        for (auto* p : ps) {
            m_.push_back(p->w.like_zeros());
            v_.push_back(p->w.like_zeros());
        }
    }

    void step(const ParamRefs<T>& ps) {
        if (m_.size() != ps.size()) throw ValidationError("adam: not attached to these params");
        ++t_;
        const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
        for (size_t k = 0; k < ps.size(); ++k) {
            Param<T>& p = *ps[k];
            if (!p.trainable) continue;
            for (size_t i = 0; i < p.w.v.size(); ++i) {
                double g = p.g.v[i];
                double m = 0.9 * static_cast<double>(m_[k].v[i]) + 0.1 * g;
                double v = 0.999 * static_cast<double>(v_[k].v[i]) + 0.001 * g * g;
                m_[k].v[i] = static_cast<T>(m);
                v_[k].v[i] = static_cast<T>(v);
                double mhat = m / bc1;
                double vhat = v / bc2;
                p.w.v[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + 1e-8));
            }
        }
    }

    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

    std::vector<Tensor<T>>& moments_m() { return m_; }
    std::vector<Tensor<T>>& moments_v() { return v_; }

private:
    double lr_ = 1e-4;
    int64_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

// ema' = decay * ema + (1 - decay) * params, elementwise
template <class T>
void ema_update(Tensor<T>& ema, const Tensor<T>& params, double decay) {
    ema.require_same_shape(params, "ema_update");
    for (size_t i = 0; i < ema.v.size(); ++i)
        ema.v[i] = static_cast<T>(decay * static_cast<double>(ema.v[i]) +
                                  (1.0 - decay) * static_cast<double>(params.v[i]));
}

template <class T>
class EmaTracker {
public:
    void init(const ParamRefs<T>& ps, double decay) {
        decay_ = decay;
        shadow_.clear();
        for (auto* p : ps) shadow_.push_back(p->w);
    }

    void update(const ParamRefs<T>& ps) {
        if (shadow_.size() != ps.size()) throw ValidationError("ema: not attached");
        for (size_t k = 0; k < ps.size(); ++k) ema_update(shadow_[k], ps[k]->w, decay_);
    }

    const std::vector<Tensor<T>>& shadow() const { return shadow_; }
    std::vector<Tensor<T>>& shadow() { return shadow_; }
    double decay() const { return decay_; }

    // copy the averaged weights into a model clone for evaluation
    void write_to(const ParamRefs<T>& ps) const {
        if (shadow_.size() != ps.size()) throw ValidationError("ema: not attached");
        for (size_t k = 0; k < ps.size(); ++k) ps[k]->w = shadow_[k];
    }

private:
    double decay_ = 0.9999;
    std::vector<Tensor<T>> shadow_;
};

}  // namespace vivat
