#include "mmlc/synth/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "mmlc/core/metrics.hpp"
#include "mmlc/io/container.hpp"

namespace mmlc::synth {

namespace {

constexpr int kHidden = 200;
constexpr int kCalibrationSamples = 100000;
constexpr int kCalibrationBatch = 1000;
constexpr float kDegenerateSigma = 1e-6f;
constexpr int kMaxResample = 8;

// Stream ids under the spec seed; construction nets get 1000+i.
constexpr std::uint64_t kNetStreamBase = 1000;

void fill_standard_normal(Tensorf& t, RngStream& rng) {
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
}

}  // namespace

void SyntheticSpec::validate() const {
  if (d_m < 0 || d_e < 0 || d_m + d_e < 1) {
    throw std::invalid_argument("synthetic spec: need d_m, d_e >= 0 and d_m + d_e >= 1");
  }
  if (n < 2) throw std::invalid_argument("synthetic spec: need n >= 2 modalities");
  if (k < 1) throw std::invalid_argument("synthetic spec: need expansion k >= 1");
}

Tensorf mlp_apply(const Mlp<float>& net, const Tensorf& x) {
  Tensorf h = x;
  for (const auto& l : net.layers) {
    Tensorf y({h.dim(0), l.out_dim()});
    y.mat().noalias() = h.mat() * l.W->value.mat().transpose();
    y.mat().rowwise() += l.b->value.mat(1, l.out_dim()).row(0);
    if (l.act == Act::Relu) y.array() = y.array().max(0.0f);
    h = std::move(y);
  }
  return h;
}

SourceBatch sample_sources(const SyntheticSpec& spec, int batch, RngStream& rng) {
  spec.validate();
  if (batch < 1) throw std::invalid_argument("sample_sources: batch must be >= 1");

  SourceBatch s;
  s.x_m = Tensorf({batch, spec.d_m});
  fill_standard_normal(s.x_m, rng);
  s.x_e.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    Tensorf e({batch, spec.d_e});
    fill_standard_normal(e, rng);
    s.x_e.push_back(std::move(e));
  }

  // x_i = x_{e,i} (+) x_m, exclusive part first.
  s.x_i.reserve(static_cast<std::size_t>(spec.n));
  s.x_concat = Tensorf({batch, spec.n * spec.d_x()});
  for (int i = 0; i < spec.n; ++i) {
    Tensorf xi({batch, spec.d_x()});
    xi.mat().leftCols(spec.d_e) = s.x_e[static_cast<std::size_t>(i)].mat();
    xi.mat().rightCols(spec.d_m) = s.x_m.mat();
    s.x_concat.mat().middleCols(i * spec.d_x(), spec.d_x()) = xi.mat();
    s.x_i.push_back(std::move(xi));
  }
  return s;
}

ConstructionNet ConstructionNet::build(const SyntheticSpec& spec,
                                       std::uint64_t seed,
                                       std::uint64_t stream_id) {
  spec.validate();
  for (int attempt = 0; attempt < kMaxResample; ++attempt) {
    ConstructionNet net;
    RngStream init(seed, stream_id + static_cast<std::uint64_t>(attempt) * 101);
    net.net_ = Mlp<float>::make(net.store_, "C", spec.d_x(),
                                {kHidden, kHidden, spec.d_y()}, init);
    net.store_.freeze();

    // Empirical normalization constants from a one-off calibration sample.
    RngStream calib(seed, stream_id + 7777);
    std::vector<OnlineMean> stats(static_cast<std::size_t>(spec.d_y()));
    for (int done = 0; done < kCalibrationSamples; done += kCalibrationBatch) {
      const int b = std::min(kCalibrationBatch, kCalibrationSamples - done);
      Tensorf x({b, spec.d_x()});
      fill_standard_normal(x, calib);
      Tensorf raw = mlp_apply(net.net_, x);
      for (int r = 0; r < b; ++r) {
        for (int c = 0; c < spec.d_y(); ++c) {
          stats[static_cast<std::size_t>(c)].add(raw[static_cast<Eigen::Index>(r) * spec.d_y() + c]);
        }
      }
    }

    net.mu_ = Tensorf({spec.d_y()});
    net.sigma_ = Tensorf({spec.d_y()});
    bool degenerate = false;
    for (int c = 0; c < spec.d_y(); ++c) {
      net.mu_[c] = static_cast<float>(stats[static_cast<std::size_t>(c)].mean());
      const float sd = static_cast<float>(std::sqrt(stats[static_cast<std::size_t>(c)].variance()));
      net.sigma_[c] = sd;
      degenerate = degenerate || sd < kDegenerateSigma;
    }
    if (!degenerate) return net;
  }
  throw std::runtime_error("construction net stayed degenerate after resampling");
}

Tensorf ConstructionNet::apply(const Tensorf& x) const {
  Tensorf raw = mlp_apply(net_, x);
  const int d = raw.dim(1);
  raw.mat().rowwise() -= mu_.mat(1, d).row(0);
  raw.mat().array().rowwise() /= sigma_.mat(1, d).row(0).array();
  return raw;
}

std::vector<ConstructionNet> build_construction_nets(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<ConstructionNet> nets;
  nets.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    nets.push_back(ConstructionNet::build(spec, spec.seed,
                                          kNetStreamBase + static_cast<std::uint64_t>(i)));
  }
  return nets;
}

ModalityBatch construct_modalities(const std::vector<ConstructionNet>& nets,
                                   const SourceBatch& sources) {
  if (nets.size() != sources.x_i.size()) {
    throw std::invalid_argument("construct_modalities: nets/sources modality count mismatch");
  }
  ModalityBatch m;
  m.y.reserve(nets.size());
  const int batch = sources.batch();
  int d_y = 0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    m.y.push_back(nets[i].apply(sources.x_i[i]));
    d_y = m.y.back().dim(1);
  }
  m.y_concat = Tensorf({batch, static_cast<int>(nets.size()) * d_y});
  for (std::size_t i = 0; i < nets.size(); ++i) {
    m.y_concat.mat().middleCols(static_cast<int>(i) * d_y, d_y) = m.y[i].mat();
  }
  return m;
}

void write_dump(const std::string& path, const SyntheticSpec& spec,
                const std::vector<ConstructionNet>& nets, int n_batches,
                int batch_size, RngStream& rng) {
  io::Writer w(path);
  w.magic("MMLCSYN1");
  w.u32(1);  // version
  w.u32(static_cast<std::uint32_t>(spec.d_m));
  w.u32(static_cast<std::uint32_t>(spec.d_e));
  w.u32(static_cast<std::uint32_t>(spec.n));
  w.u32(static_cast<std::uint32_t>(spec.k));
  w.u32(static_cast<std::uint32_t>(n_batches));
  w.u32(static_cast<std::uint32_t>(batch_size));
  for (int b = 0; b < n_batches; ++b) {
    SourceBatch s = sample_sources(spec, batch_size, rng);
    ModalityBatch m = construct_modalities(nets, s);
    w.f32s(s.x_m.data(), static_cast<std::size_t>(s.x_m.size()));
    for (const auto& e : s.x_e) w.f32s(e.data(), static_cast<std::size_t>(e.size()));
    for (const auto& y : m.y) w.f32s(y.data(), static_cast<std::size_t>(y.size()));
  }
  w.close();
}

DumpContent read_dump(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("MMLCSYN1");
  if (r.u32() != 1) throw io::IoError("unsupported dump version in " + path);
  DumpContent d;
  d.spec.d_m = static_cast<int>(r.u32());
  d.spec.d_e = static_cast<int>(r.u32());
  d.spec.n = static_cast<int>(r.u32());
  d.spec.k = static_cast<int>(r.u32());
  d.n_batches = static_cast<int>(r.u32());
  d.batch_size = static_cast<int>(r.u32());
  const std::size_t per_batch =
      static_cast<std::size_t>(d.batch_size) *
      (static_cast<std::size_t>(d.spec.d_m) +
       static_cast<std::size_t>(d.spec.n) * d.spec.d_e +
       static_cast<std::size_t>(d.spec.n) * d.spec.d_y());
  d.payload.resize(per_batch * static_cast<std::size_t>(d.n_batches));
  r.f32s(d.payload.data(), d.payload.size());
  return d;
}

}  // namespace mmlc::synth
