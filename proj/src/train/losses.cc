#include "e2eaec/train/losses.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "e2eaec/dsp/fft.h"
#include "e2eaec/error.h"
#include "e2eaec/numcore/ops.h"

namespace e2eaec::train {

using numcore::shape_str;

LossWeights LossWeights::for_mode(DelayMode mode) {
  LossWeights w;
  w.delay = mode == DelayMode::kMse ? 100.0 : 1.0;
  return w;
}

void LossWeights::validate() const {
  for (double v : {spec1, spec2, delay, vad, modulation, snr}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractError("loss weights must be finite and >= 0");
    }
  }
}

template <typename T>
Var<T> istft_op(const Var<T>& spec, const dsp::StftGeometry& geometry, std::size_t out_len) {
  const auto& s = spec.shape();
  if (s.size() != 3 || s[2] != 2 || s[1] != geometry.bins()) {
    throw DimensionError("istft_op: spectrum " + shape_str(s) + " does not fit " +
                         std::to_string(geometry.bins()) + " bins");
  }
  const std::size_t frames = s[0];
  const auto wave = dsp::istft(model::tensor_spectrogram(spec.value(), geometry), out_len, 1);
  Tensor<T> out({out_len});
  for (std::size_t n = 0; n < out_len; ++n) out[n] = static_cast<T>(wave[n]);

  const int is = spec.id();
  return spec.graph().record(std::move(out), {is}, [=](Graph<T>& g, const Tensor<T>& go) {
    const std::size_t L = geometry.frame_len, hop = geometry.hop, bins = geometry.bins();
    const auto w = dsp::sqrt_hann(L);
    const std::size_t span = frames == 0 ? 0 : (frames - 1) * hop + L;
    std::vector<double> norm(span, 0.0);
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t m = 0; m < L; ++m) norm[t * hop + m] += w[m] * w[m];
    std::vector<double> gn(span, 0.0);
    for (std::size_t n = 0; n < std::min(span, out_len); ++n)
      gn[n] = norm[n] > 1e-10 ? static_cast<double>(go[n]) / norm[n] : 0.0;

    dsp::RealFft fft(geometry.fft_size);
    const double inv_n = 1.0 / static_cast<double>(geometry.fft_size);
    std::vector<double> frame(L);
    std::vector<std::complex<double>> G(bins);
    Tensor<T>& gs = g.grad_buffer(is);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t m = 0; m < L; ++m) frame[m] = w[m] * gn[t * hop + m];
      fft.forward(frame, G);
      for (std::size_t k = 0; k < bins; ++k) {
        const bool edge = k == 0 || k == bins - 1;
        const double c = (edge ? 1.0 : 2.0) * inv_n;
        gs[(t * bins + k) * 2] += static_cast<T>(c * G[k].real());
        if (!edge) gs[(t * bins + k) * 2 + 1] += static_cast<T>(c * G[k].imag());
      }
    }
  });
}

template <typename T>
Var<T> snr_loss(const Var<T>& est, const Tensor<T>& target) {
  if (est.value().size() != target.size()) {
    throw DimensionError("snr_loss: estimate " + shape_str(est.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  const std::size_t n = target.size();
  double et = 0.0, ee = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = target[i], d = t - static_cast<double>(est.value()[i]);
    et += t * t;
    ee += d * d;
  }
  const double raw = -10.0 * std::log10(et / (ee + kSnrEps));
  const double val = std::clamp(raw, -kSnrClamp, kSnrClamp);
  const bool active = raw > -kSnrClamp && raw < kSnrClamp;
  const int ie = est.id();
  return est.graph().record(
      Tensor<T>::scalar(static_cast<T>(val)), {ie}, [=](Graph<T>& g, const Tensor<T>& go) {
        if (!active) return;
        // d/de of 10 log10(ee + eps) with ee = |t - e|^2
        const double k = static_cast<double>(go[0]) * 10.0 / std::numbers::ln10 / (ee + kSnrEps);
        Tensor<T>& gx = g.grad_buffer(ie);
        for (std::size_t i = 0; i < n; ++i)
          gx[i] += static_cast<T>(k * -2.0 * (target[i] - static_cast<double>(est.value()[i])));
      });
}

double snr_loss(const dsp::AudioBuffer& est, const dsp::AudioBuffer& target) {
  Graph<double> g(false);
  auto e = g.constant(Tensor<double>({est.size()}, est.samples));
  return snr_loss(e, Tensor<double>({target.size()}, target.samples)).value().item();
}

namespace {

struct ModGeometry {
  std::size_t frames, bins, windows, starts_hop;
};

ModGeometry mod_geometry(std::size_t frames, std::size_t bins) {
  const std::size_t windows = frames < kModWindow ? 1 : 1 + (frames - kModWindow) / kModHop;
  return {frames, bins, windows, kModHop};
}

constexpr std::size_t kModBins = kModWindow / 2 + 1;

// |DFT| of the envelope over each window: out[(w * bins + f) * kModBins + k]
template <typename E>
std::vector<std::complex<double>> modulation_spectrum(const E& env, const ModGeometry& mg) {
  std::vector<std::complex<double>> out(mg.windows * mg.bins * kModBins);
  for (std::size_t w = 0; w < mg.windows; ++w)
    for (std::size_t f = 0; f < mg.bins; ++f)
      for (std::size_t k = 0; k < kModBins; ++k) {
        std::complex<double> z = 0.0;
        for (std::size_t j = 0; j < kModWindow; ++j) {
          const std::size_t t = w * kModHop + j;
          if (t >= mg.frames) break;
          const double ph = -2.0 * std::numbers::pi * static_cast<double>(k * j) / kModWindow;
          z += env(t, f) * std::complex<double>(std::cos(ph), std::sin(ph));
        }
        out[(w * mg.bins + f) * kModBins + k] = z;
      }
  return out;
}

}  // namespace

template <typename T>
Var<T> modulation_loss(const Var<T>& est_spec, const Tensor<T>& target_spec) {
  const auto& s = est_spec.shape();
  if (s.size() != 3 || s[2] != 2 || target_spec.shape() != s) {
    throw DimensionError("modulation_loss: spectra " + shape_str(s) + " and " +
                         shape_str(target_spec.shape()) + " must be equal [T, F, 2]");
  }
  const auto mg = mod_geometry(s[0], s[1]);
  const Tensor<T>& ev = est_spec.value();
  auto mag = [](const Tensor<T>& x, std::size_t t, std::size_t f, std::size_t F) {
    const double re = x[(t * F + f) * 2], im = x[(t * F + f) * 2 + 1];
    return std::sqrt(re * re + im * im);
  };
  const std::size_t F = s[1];
  const auto Ze = modulation_spectrum([&](std::size_t t, std::size_t f) { return mag(ev, t, f, F); }, mg);
  const auto Zt = modulation_spectrum(
      [&](std::size_t t, std::size_t f) { return mag(target_spec, t, f, F); }, mg);
  double sum = 0.0;
  for (std::size_t i = 0; i < Ze.size(); ++i) sum += std::abs(std::abs(Ze[i]) - std::abs(Zt[i]));
  const double count = static_cast<double>(Ze.size());

  const int is = est_spec.id();
  return est_spec.graph().record(
      Tensor<T>::scalar(static_cast<T>(sum / count)), {is},
      [=](Graph<T>& g, const Tensor<T>& go) {
        const Tensor<T>& x = g.value(is);
        std::vector<double> genv(mg.frames * F, 0.0);
        for (std::size_t w = 0; w < mg.windows; ++w)
          for (std::size_t f = 0; f < F; ++f)
            for (std::size_t k = 0; k < kModBins; ++k) {
              const std::size_t i = (w * F + f) * kModBins + k;
              const double me = std::abs(Ze[i]), mt = std::abs(Zt[i]);
              if (me == 0.0 || me == mt) continue;
              const double dm = (me > mt ? 1.0 : -1.0) * static_cast<double>(go[0]) / count;
              const std::complex<double> u = std::conj(Ze[i]) / me;
              for (std::size_t j = 0; j < kModWindow; ++j) {
                const std::size_t t = w * kModHop + j;
                if (t >= mg.frames) break;
                const double ph = -2.0 * std::numbers::pi * static_cast<double>(k * j) / kModWindow;
                genv[t * F + f] += dm * (u * std::complex<double>(std::cos(ph), std::sin(ph))).real();
              }
            }
        Tensor<T>& gx = g.grad_buffer(is);
        for (std::size_t t = 0; t < mg.frames; ++t)
          for (std::size_t f = 0; f < F; ++f) {
            const double m = mag(x, t, f, F);
            if (m == 0.0) continue;
            const std::size_t o = (t * F + f) * 2;
            gx[o] += static_cast<T>(genv[t * F + f] * static_cast<double>(x[o]) / m);
            gx[o + 1] += static_cast<T>(genv[t * F + f] * static_cast<double>(x[o + 1]) / m);
          }
      });
}

namespace {

void check_labels(std::size_t frames, const std::vector<int>& labels, const char* what) {
  if (labels.size() != frames) {
    throw DimensionError(std::string(what) + ": " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(frames) + " frames");
  }
}

}  // namespace

template <typename T>
Var<T> delay_loss_mse(const Var<T>& delay, const std::vector<int>& labels, bool* empty) {
  if (delay.shape().size() != 1) {
    throw DimensionError("delay_loss_mse needs [T], got " + shape_str(delay.shape()));
  }
  const std::size_t frames = delay.dim(0);
  check_labels(frames, labels, "delay_loss_mse");
  std::size_t valid = 0;
  double sum = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    if (labels[t] < 0) continue;
    const double d = static_cast<double>(delay.value()[t]) - labels[t];
    sum += d * d;
    ++valid;
  }
  if (empty) *empty = valid == 0;
  const double val = valid ? sum / static_cast<double>(valid) : 0.0;
  const int id = delay.id();
  return delay.graph().record(
      Tensor<T>::scalar(static_cast<T>(val)), {id}, [=](Graph<T>& g, const Tensor<T>& go) {
        if (valid == 0) return;
        Tensor<T>& gd = g.grad_buffer(id);
        const Tensor<T>& x = g.value(id);
        const double k = 2.0 * static_cast<double>(go[0]) / static_cast<double>(valid);
        for (std::size_t t = 0; t < frames; ++t)
          if (labels[t] >= 0) gd[t] += static_cast<T>(k * (static_cast<double>(x[t]) - labels[t]));
      });
}

template <typename T>
Var<T> delay_loss_ce(const Var<T>& attention, const std::vector<int>& labels, bool* empty) {
  if (attention.shape().size() != 2) {
    throw DimensionError("delay_loss_ce needs [T, H], got " + shape_str(attention.shape()));
  }
  const std::size_t frames = attention.dim(0), H = attention.dim(1);
  check_labels(frames, labels, "delay_loss_ce");
  std::size_t valid = 0;
  double sum = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    if (labels[t] < 0) continue;
    if (static_cast<std::size_t>(labels[t]) >= H) {
      throw ContractError("delay_loss_ce: label " + std::to_string(labels[t]) + " at frame " +
                          std::to_string(t) + " is outside [0, " + std::to_string(H) + ")");
    }
    sum -= std::log(static_cast<double>(attention.value()[t * H + labels[t]]) + kLogEps);
    ++valid;
  }
  if (empty) *empty = valid == 0;
  const double val = valid ? sum / static_cast<double>(valid) : 0.0;
  const int id = attention.id();
  return attention.graph().record(
      Tensor<T>::scalar(static_cast<T>(val)), {id}, [=](Graph<T>& g, const Tensor<T>& go) {
        if (valid == 0) return;
        Tensor<T>& ga = g.grad_buffer(id);
        const Tensor<T>& a = g.value(id);
        const double k = static_cast<double>(go[0]) / static_cast<double>(valid);
        for (std::size_t t = 0; t < frames; ++t) {
          if (labels[t] < 0) continue;
          const std::size_t i = t * H + labels[t];
          ga[i] += static_cast<T>(-k / (static_cast<double>(a[i]) + kLogEps));
        }
      });
}

template <typename T>
Var<T> vad_bce(const Var<T>& pred, const std::vector<int>& labels) {
  if (pred.shape().size() != 1) {
    throw DimensionError("vad_bce needs [T], got " + shape_str(pred.shape()));
  }
  const std::size_t frames = pred.dim(0);
  check_labels(frames, labels, "vad_bce");
  if (frames == 0) throw ContractError("vad_bce: no frames");
  double sum = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const double p = std::clamp(static_cast<double>(pred.value()[t]), kLogEps, 1.0 - kLogEps);
    sum -= labels[t] ? std::log(p) : std::log(1.0 - p);
  }
  const int id = pred.id();
  return pred.graph().record(
      Tensor<T>::scalar(static_cast<T>(sum / static_cast<double>(frames))), {id},
      [=](Graph<T>& g, const Tensor<T>& go) {
        Tensor<T>& gp = g.grad_buffer(id);
        const Tensor<T>& x = g.value(id);
        const double k = static_cast<double>(go[0]) / static_cast<double>(frames);
        for (std::size_t t = 0; t < frames; ++t) {
          const double raw = static_cast<double>(x[t]);
          if (raw <= kLogEps || raw >= 1.0 - kLogEps) continue;
          gp[t] += static_cast<T>(labels[t] ? -k / raw : k / (1.0 - raw));
        }
      });
}

template <typename T>
LossValues values_of(const LossTerms<T>& terms) {
  auto v = [](const Var<T>& x) { return static_cast<double>(x.value().item()); };
  return {v(terms.total), v(terms.spec1), v(terms.spec2), v(terms.delay), v(terms.vad)};
}

template <typename T>
Var<T> combine_losses(const Var<T>& spec1, const Var<T>& spec2, const Var<T>& delay,
                      const Var<T>& vad, const LossWeights& w) {
  w.validate();
  using numcore::add;
  using numcore::scale;
  return add(add(scale(spec1, static_cast<T>(w.spec1)), scale(spec2, static_cast<T>(w.spec2))),
             add(scale(delay, static_cast<T>(w.delay)), scale(vad, static_cast<T>(w.vad))));
}

template <typename T>
Var<T> spectrum_loss(const Var<T>& spec, const std::vector<double>& target,
                     const dsp::StftGeometry& geometry, std::size_t out_len,
                     const LossWeights& w) {
  if (target.size() != out_len) {
    throw DimensionError("spectrum_loss: target has " + std::to_string(target.size()) +
                         " samples, expected " + std::to_string(out_len));
  }
  const dsp::AudioBuffer tb(target, 1);
  auto tspec = model::spectrogram_tensor<T>(dsp::stft(tb, geometry));
  if (tspec.shape() != spec.shape()) {
    throw DimensionError("spectrum_loss: target spectrum " + shape_str(tspec.shape()) +
                         " vs estimate " + shape_str(spec.shape()));
  }
  Tensor<T> twave({out_len});
  for (std::size_t i = 0; i < out_len; ++i) twave[i] = static_cast<T>(target[i]);
  auto mod = modulation_loss(spec, tspec);
  auto snr = snr_loss(istft_op(spec, geometry, out_len), twave);
  return numcore::add(numcore::scale(mod, static_cast<T>(w.modulation)),
                      numcore::scale(snr, static_cast<T>(w.snr)));
}

template <typename T>
LossTerms<T> total_loss(const model::GraphOutputs<T>& out, const LossTargets& targets,
                        const LossWeights& w, DelayMode mode) {
  LossTerms<T> terms;
  terms.spec1 = spectrum_loss(out.spec1, targets.target1, targets.geometry, targets.out_len, w);
  terms.spec2 = spectrum_loss(out.spec2, targets.target2, targets.geometry, targets.out_len, w);
  terms.delay = mode == DelayMode::kMse
                    ? delay_loss_mse(out.delay, targets.delay_labels, &terms.delay_empty)
                    : delay_loss_ce(out.attention, targets.delay_labels, &terms.delay_empty);
  terms.vad = vad_bce(out.vad, targets.vad_labels);
  terms.total = combine_losses(terms.spec1, terms.spec2, terms.delay, terms.vad, w);
  return terms;
}

#define E2EAEC_INSTANTIATE(T)                                                        \
  template Var<T> istft_op(const Var<T>&, const dsp::StftGeometry&, std::size_t);    \
  template Var<T> snr_loss(const Var<T>&, const Tensor<T>&);                         \
  template Var<T> modulation_loss(const Var<T>&, const Tensor<T>&);                  \
  template Var<T> delay_loss_mse(const Var<T>&, const std::vector<int>&, bool*);     \
  template Var<T> delay_loss_ce(const Var<T>&, const std::vector<int>&, bool*);      \
  template Var<T> vad_bce(const Var<T>&, const std::vector<int>&);                   \
  template LossValues values_of(const LossTerms<T>&);                                \
  template Var<T> combine_losses(const Var<T>&, const Var<T>&, const Var<T>&,        \
                                 const Var<T>&, const LossWeights&);                 \
  template Var<T> spectrum_loss(const Var<T>&, const std::vector<double>&,           \
                                const dsp::StftGeometry&, std::size_t,               \
                                const LossWeights&);                                 \
  template LossTerms<T> total_loss(const model::GraphOutputs<T>&, const LossTargets&, \
                                   const LossWeights&, DelayMode);

E2EAEC_INSTANTIATE(float)
E2EAEC_INSTANTIATE(double)

#undef E2EAEC_INSTANTIATE

}  // namespace e2eaec::train
