#include "stereo/pac.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <thread>

namespace stereo {

namespace {

int g_threads = 1;

// Static row partition; deterministic regardless of scheduling.
template <class Fn>
void parallel_rows(int height, Fn&& fn) {
  const int n = g_threads;
  if (n <= 1 || height < 2 * n) {
    for (int y = 0; y < height; ++y) fn(y);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int t = 0; t < n; ++t) {
    pool.emplace_back([&, t] {
      for (int y = t; y < height; y += n) fn(y);
    });
  }
  for (auto& th : pool) th.join();
}

void check_bank(const FilterBank& b) {
  if (b.kernel_size < 1 || b.kernel_size % 2 == 0)
    throw ContractError("FilterBank: kernel size must be odd and positive");
  if (b.weights.size() != static_cast<std::size_t>(b.out_channels) * b.in_channels *
                              b.kernel_size * b.kernel_size ||
      b.bias.size() != static_cast<std::size_t>(b.out_channels))
    throw ContractError("FilterBank: weight/bias storage does not match dimensions");
}

}  // namespace

void set_num_threads(int n) { g_threads = n < 1 ? 1 : n; }
int num_threads() { return g_threads; }

FilterBank FilterBank::zeros(int out_channels, int in_channels, int kernel_size) {
  FilterBank b;
  b.out_channels = out_channels;
  b.in_channels = in_channels;
  b.kernel_size = kernel_size;
  b.weights.assign(
      static_cast<std::size_t>(out_channels) * in_channels * kernel_size * kernel_size, 0.0);
  b.bias.assign(out_channels, 0.0);
  return b;
}

FilterBank FilterBank::uniform(int out_channels, int in_channels, int kernel_size) {
  FilterBank b = zeros(out_channels, in_channels, kernel_size);
  const double w = 1.0 / (static_cast<double>(kernel_size) * kernel_size * in_channels);
  for (double& x : b.weights) x = w;
  return b;
}

FilterBank FilterBank::identity(int channels, int kernel_size) {
  FilterBank b = zeros(channels, channels, kernel_size);
  const int r = kernel_size / 2;
  for (int c = 0; c < channels; ++c) b.w(c, c, r, r) = 1.0;
  return b;
}

double gaussian_affinity(std::span<const double> fi, std::span<const double> fj) {
  if (fi.size() != fj.size())
    throw ContractError("gaussian_affinity: feature length mismatch");
  double sq = 0.0;
  for (std::size_t c = 0; c < fi.size(); ++c) {
    const double d = fi[c] - fj[c];
    sq += d * d;
  }
  return std::exp(-0.5 * sq);
}

AffinityField compute_affinity(const FeatureMap& f, int kernel_size, int dilation,
                               bool normalize) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ContractError("compute_affinity: kernel size must be odd and positive");
  if (dilation < 1) throw ContractError("compute_affinity: dilation must be >= 1");

  AffinityField a;
  a.width = f.width;
  a.height = f.height;
  a.kernel_size = kernel_size;
  a.dilation = dilation;
  a.normalized = normalize;
  const std::size_t taps = a.taps();
  a.k.assign(f.plane_size() * taps, 0.0);
  if (normalize) a.sum.assign(f.plane_size(), 0.0);

  const int r = kernel_size / 2;
  parallel_rows(f.height, [&](int y) {
    for (int x = 0; x < f.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * f.width + x) * taps;
      double s = 0.0;
      for (int ky = 0; ky < kernel_size; ++ky) {
        const int yy = y + dilation * (ky - r);
        for (int kx = 0; kx < kernel_size; ++kx) {
          const int xx = x + dilation * (kx - r);
          if (xx < 0 || xx >= f.width || yy < 0 || yy >= f.height) continue;
          double sq = 0.0;
          for (int c = 0; c < f.channels; ++c) {
            const double d = f.at(c, x, y) - f.at(c, xx, yy);
            sq += d * d;
          }
          const double k = std::exp(-0.5 * sq);
          a.k[base + static_cast<std::size_t>(ky) * kernel_size + kx] = k;
          s += k;
        }
      }
      if (normalize) a.sum[static_cast<std::size_t>(y) * f.width + x] = s;
    }
  });
  return a;
}

FeatureMap conv_forward(const FeatureMap& v, const FilterBank& filt, int dilation) {
  check_bank(filt);
  if (v.channels != filt.in_channels)
    throw ContractError("conv_forward: input channels do not match filter");
  if (dilation < 1) throw ContractError("conv_forward: dilation must be >= 1");

  FeatureMap out = FeatureMap::zeros(filt.out_channels, v.width, v.height);
  const int s = filt.kernel_size, r = s / 2;
  parallel_rows(v.height, [&](int y) {
    for (int x = 0; x < v.width; ++x) {
      for (int co = 0; co < filt.out_channels; ++co) {
        double acc = filt.bias[co];
        for (int ky = 0; ky < s; ++ky) {
          const int yy = y + dilation * (ky - r);
          if (yy < 0 || yy >= v.height) continue;
          for (int kx = 0; kx < s; ++kx) {
            const int xx = x + dilation * (kx - r);
            if (xx < 0 || xx >= v.width) continue;
            for (int ci = 0; ci < filt.in_channels; ++ci)
              acc += filt.w(co, ci, ky, kx) * v.at(ci, xx, yy);
          }
        }
        out.at(co, x, y) = acc;
      }
    }
  });
  return out;
}

namespace {

void check_pac_inputs(const FeatureMap& v, const FeatureMap& f, const FilterBank& filt) {
  check_bank(filt);
  if (v.channels != filt.in_channels)
    throw ContractError("pac_forward: input channels do not match filter");
  if (v.width != f.width || v.height != f.height)
    throw ContractError("pac_forward: input and guidance spatial sizes differ");
}

}  // namespace

FeatureMap pac_forward(const FeatureMap& v, const FeatureMap& f,
                       std::shared_ptr<const AffinityField> affinity, const FilterBank& filt,
                       PacCache* cache) {
  check_pac_inputs(v, f, filt);
  const AffinityField& a = *affinity;
  if (a.width != v.width || a.height != v.height || a.kernel_size != filt.kernel_size)
    throw ContractError("pac_forward: affinity field does not match input/filter");

  FeatureMap out = FeatureMap::zeros(filt.out_channels, v.width, v.height);
  const int s = filt.kernel_size, r = s / 2, dilation = a.dilation;
  const std::size_t taps = a.taps();

  parallel_rows(v.height, [&](int y) {
    for (int x = 0; x < v.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * v.width + x;
      const double inv_sum = a.normalized ? 1.0 / a.sum[i] : 1.0;
      for (int co = 0; co < filt.out_channels; ++co) {
        double acc = filt.bias[co];
        for (int ky = 0; ky < s; ++ky) {
          const int yy = y + dilation * (ky - r);
          if (yy < 0 || yy >= v.height) continue;
          for (int kx = 0; kx < s; ++kx) {
            const int xx = x + dilation * (kx - r);
            if (xx < 0 || xx >= v.width) continue;
            const double k = a.k[i * taps + static_cast<std::size_t>(ky) * s + kx] * inv_sum;
            for (int ci = 0; ci < filt.in_channels; ++ci)
              acc += k * filt.w(co, ci, ky, kx) * v.at(ci, xx, yy);
          }
        }
        out.at(co, x, y) = acc;
      }
    }
  });

  if (cache) {
    cache->affinity = std::move(affinity);
    cache->v = v;
    cache->f = f;
    cache->bank = filt;
  }
  return out;
}

FeatureMap pac_forward(const FeatureMap& v, const FeatureMap& f, const FilterBank& filt,
                       int dilation, bool normalize_affinity, PacCache* cache) {
  check_pac_inputs(v, f, filt);
  auto aff = std::make_shared<AffinityField>(
      compute_affinity(f, filt.kernel_size, dilation, normalize_affinity));
  return pac_forward(v, f, std::move(aff), filt, cache);
}

PacGrads pac_backward(const FeatureMap& upstream, const PacCache& cache) {
  const FeatureMap& v = cache.v;
  const FeatureMap& f = cache.f;
  const FilterBank& filt = cache.bank;
  const AffinityField& a = *cache.affinity;
  if (upstream.channels != filt.out_channels || upstream.width != v.width ||
      upstream.height != v.height)
    throw ContractError("pac_backward: upstream shape does not match cached forward");

  PacGrads g;
  g.v = FeatureMap::zeros(v.channels, v.width, v.height);
  g.f = FeatureMap::zeros(f.channels, f.width, f.height);
  g.bank = FilterBank::zeros(filt.out_channels, filt.in_channels, filt.kernel_size);

  const int s = filt.kernel_size, r = s / 2, dilation = a.dilation;
  const std::size_t taps = a.taps();
  std::vector<double> gk(taps);  // d(loss)/d(applied affinity) at one pixel

  for (int y = 0; y < v.height; ++y) {
    for (int x = 0; x < v.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * v.width + x;
      const double inv_sum = a.normalized ? 1.0 / a.sum[i] : 1.0;
      std::fill(gk.begin(), gk.end(), 0.0);

      for (int ky = 0; ky < s; ++ky) {
        const int yy = y + dilation * (ky - r);
        if (yy < 0 || yy >= v.height) continue;
        for (int kx = 0; kx < s; ++kx) {
          const int xx = x + dilation * (kx - r);
          if (xx < 0 || xx >= v.width) continue;
          const std::size_t t = static_cast<std::size_t>(ky) * s + kx;
          const double k_applied = a.k[i * taps + t] * inv_sum;

          double contract = 0.0;  // sum_co U_i(co) * (W v_j)(co), the affinity gradient
          for (int co = 0; co < filt.out_channels; ++co) {
            const double u = upstream.at(co, x, y);
            if (u == 0.0) continue;
            double wv = 0.0;
            for (int ci = 0; ci < filt.in_channels; ++ci) {
              const double vj = v.at(ci, xx, yy);
              wv += filt.w(co, ci, ky, kx) * vj;
              g.bank.w(co, ci, ky, kx) += u * k_applied * vj;
              g.v.at(ci, xx, yy) += u * k_applied * filt.w(co, ci, ky, kx);
            }
            contract += u * wv;
          }
          gk[t] = contract;
        }
      }

      for (int co = 0; co < filt.out_channels; ++co)
        g.bank.bias[co] += upstream.at(co, x, y);

      // Chain through the affinities into the guidance features.
      for (int ky = 0; ky < s; ++ky) {
        const int yy = y + dilation * (ky - r);
        if (yy < 0 || yy >= v.height) continue;
        for (int kx = 0; kx < s; ++kx) {
          const int xx = x + dilation * (kx - r);
          if (xx < 0 || xx >= v.width) continue;
          const std::size_t t = static_cast<std::size_t>(ky) * s + kx;
          const double k = a.k[i * taps + t];

          double dk;
          if (a.normalized) {
            // A_t = K_t / S: dL/dK_t = (G_t - sum_l A_l G_l) / S.
            double mix = 0.0;
            for (std::size_t l = 0; l < taps; ++l)
              mix += a.k[i * taps + l] * inv_sum * gk[l];
            dk = (gk[t] - mix) * inv_sum;
          } else {
            dk = gk[t];
          }
          if (dk == 0.0 || (xx == x && yy == y)) continue;  // center: f_i - f_j = 0

          for (int c = 0; c < f.channels; ++c) {
            const double diff = f.at(c, x, y) - f.at(c, xx, yy);
            const double d = dk * k * diff;
            g.f.at(c, x, y) -= d;
            g.f.at(c, xx, yy) += d;
          }
        }
      }
    }
  }
  return g;
}

GradSmoothParams GradSmoothParams::defaults() {
  GradSmoothParams p;
  p.config1 = {3, 4, 1, 1, false};
  p.config2 = {3, 8, 1, 1, false};
  p.bank1 = FilterBank::uniform(1, 1, 3);
  p.bank2 = FilterBank::uniform(1, 1, 3);
  return p;
}

GradSmoothParams GradSmoothParams::identity() {
  GradSmoothParams p = defaults();
  p.bank1 = FilterBank::identity(1, 3);
  p.bank2 = FilterBank::identity(1, 3);
  return p;
}

namespace {

FeatureMap wrap_plane(const std::vector<double>& plane, int width, int height) {
  FeatureMap m;
  m.channels = 1;
  m.width = width;
  m.height = height;
  m.values = plane;
  return m;
}

void check_gradsmooth(const GradientField& g, const FeatureMap& f,
                      const GradSmoothParams& p) {
  if (g.width != f.width || g.height != f.height)
    throw ContractError("gradsmooth_apply: gradient and guidance sizes differ");
  if (p.config1.in_channels != 1 || p.config2.out_channels != 1 ||
      p.config1.out_channels != p.config2.in_channels)
    throw ContractError("gradsmooth_apply: layer channel counts must chain 1 -> c -> 1");
}

}  // namespace

GradientField gradsmooth_apply(const GradientField& g, const FeatureMap& f,
                               const GradSmoothParams& params,
                               std::shared_ptr<const AffinityField> affinity1,
                               std::shared_ptr<const AffinityField> affinity2,
                               GradSmoothCache* cache) {
  check_gradsmooth(g, f, params);

  GradSmoothCache local;
  GradSmoothCache* c = cache ? cache : &local;

  const FeatureMap in_dx = wrap_plane(g.dx, g.width, g.height);
  const FeatureMap in_dy = wrap_plane(g.dy, g.width, g.height);
  FeatureMap dx1 = pac_forward(in_dx, f, affinity1, params.bank1, &c->dx1);
  FeatureMap dx2 = pac_forward(dx1, f, affinity2, params.bank2, &c->dx2);
  FeatureMap dy1 = pac_forward(in_dy, f, affinity1, params.bank1, &c->dy1);
  FeatureMap dy2 = pac_forward(dy1, f, affinity2, params.bank2, &c->dy2);

  GradientField out;
  out.width = g.width;
  out.height = g.height;
  out.dx = std::move(dx2.values);
  out.dy = std::move(dy2.values);
  out.valid = g.valid;
  if (cache) {
    cache->valid = g.valid;
    cache->width = g.width;
    cache->height = g.height;
  }
  return out;
}

GradientField gradsmooth_apply(const GradientField& g, const FeatureMap& f,
                               const GradSmoothParams& params, GradSmoothCache* cache) {
  check_gradsmooth(g, f, params);
  auto a1 = std::make_shared<AffinityField>(
      compute_affinity(f, params.config1.kernel_size, params.config1.dilation,
                       params.config1.normalize_affinity));
  auto a2 = std::make_shared<AffinityField>(
      compute_affinity(f, params.config2.kernel_size, params.config2.dilation,
                       params.config2.normalize_affinity));
  return gradsmooth_apply(g, f, params, std::move(a1), std::move(a2), cache);
}

GradSmoothGrads gradsmooth_backward(const std::vector<double>& upstream_dx,
                                    const std::vector<double>& upstream_dy,
                                    const GradSmoothCache& cache) {
  const std::size_t n = static_cast<std::size_t>(cache.width) * cache.height;
  if (upstream_dx.size() != n || upstream_dy.size() != n)
    throw ContractError("gradsmooth_backward: upstream shape mismatch");

  PacGrads dx2 = pac_backward(wrap_plane(upstream_dx, cache.width, cache.height), cache.dx2);
  PacGrads dx1 = pac_backward(dx2.v, cache.dx1);
  PacGrads dy2 = pac_backward(wrap_plane(upstream_dy, cache.width, cache.height), cache.dy2);
  PacGrads dy1 = pac_backward(dy2.v, cache.dy1);

  GradSmoothGrads g;
  g.dx = std::move(dx1.v.values);
  g.dy = std::move(dy1.v.values);
  g.bank1 = dx1.bank;
  g.bank2 = dx2.bank;
  for (std::size_t i = 0; i < g.bank1.weights.size(); ++i)
    g.bank1.weights[i] += dy1.bank.weights[i];
  for (std::size_t i = 0; i < g.bank1.bias.size(); ++i)
    g.bank1.bias[i] += dy1.bank.bias[i];
  for (std::size_t i = 0; i < g.bank2.weights.size(); ++i)
    g.bank2.weights[i] += dy2.bank.weights[i];
  for (std::size_t i = 0; i < g.bank2.bias.size(); ++i)
    g.bank2.bias[i] += dy2.bank.bias[i];
  return g;
}

namespace {

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f64le(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

std::uint32_t get_u32le(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

double get_f64le(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[off + i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

constexpr char kBankMagic[] = "GPFB1";

}  // namespace

std::vector<std::uint8_t> serialize_filter_bank(const FilterBank& bank) {
  check_bank(bank);
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kBankMagic, kBankMagic + 5);
  put_u32le(out, static_cast<std::uint32_t>(bank.out_channels));
  put_u32le(out, static_cast<std::uint32_t>(bank.in_channels));
  put_u32le(out, static_cast<std::uint32_t>(bank.kernel_size));
  for (double w : bank.weights) put_f64le(out, w);
  for (double b : bank.bias) put_f64le(out, b);
  return out;
}

FilterBank deserialize_filter_bank(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kBankMagic, 5) != 0)
    throw ParseError("filter bank: bad magic", 0);
  if (bytes.size() < 17) throw ParseError("filter bank: truncated header", bytes.size());
  const std::uint32_t co = get_u32le(bytes, 5);
  const std::uint32_t ci = get_u32le(bytes, 9);
  const std::uint32_t s = get_u32le(bytes, 13);
  if (co == 0 || ci == 0 || s == 0 || s % 2 == 0)
    throw ParseError("filter bank: invalid dimensions", 5);
  const std::size_t nw = static_cast<std::size_t>(co) * ci * s * s;
  const std::size_t need = 17 + 8 * (nw + co);
  if (bytes.size() < need)
    throw ParseError("filter bank: truncated payload", bytes.size());

  FilterBank b = FilterBank::zeros(static_cast<int>(co), static_cast<int>(ci),
                                   static_cast<int>(s));
  std::size_t off = 17;
  for (std::size_t i = 0; i < nw; ++i, off += 8) b.weights[i] = get_f64le(bytes, off);
  for (std::size_t i = 0; i < co; ++i, off += 8) b.bias[i] = get_f64le(bytes, off);
  return b;
}

}  // namespace stereo
