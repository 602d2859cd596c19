#include <cmath>
#include <cstring>

#include "densedet/gradcheck.hpp"
#include "densedet/random.hpp"
#include "densedet/roi_align.hpp"
#include "densedet/surface_embedding.hpp"
#include "densedet/trainkit.hpp"

namespace densedet {

namespace {

constexpr double kStep = 1e-4;

void corrupt(std::vector<double>& g) {
  if (!g.empty()) g[0] += 1e-3 + 0.1 * std::abs(g[0]);
}

void merge(AuditCheck& c, const GradCheckResult& r) {
  c.max_rel_error = std::max(c.max_rel_error, r.max_rel_error);
  c.checked += r.checked;
  c.skipped += r.skipped;
}

AuditCheck audit_cse(const AuditOptions& o) {
  AuditCheck c{"cse_loss", 0.0, 1e-5};
  for (int k = 0; k < o.seeds; ++k) {
    Rng rng(o.seed * 1000003ull + static_cast<std::uint64_t>(k));
    const int v = 5, d = 3, p = 2;
    EmbeddingMatrix E(v, d);
    PixelEmbeddingField field(d, p);
    for (double& x : E.values) x = rng.uniform(-1.0, 1.0);
    for (double& x : field.values) x = rng.uniform(-1.0, 1.0);
    std::vector<CorrespondenceSample> samples;
    for (int s = 0; s < 4; ++s)
      samples.push_back({rng.uniform_int(0, p - 1), rng.uniform_int(0, p - 1), rng.uniform_int(0, v - 1), 0});

    std::vector<double> params(E.values);
    params.insert(params.end(), field.values.begin(), field.values.end());
    const auto res = cse_loss(E, field, samples);
    std::vector<double> analytic(res.grad_E.values);
    analytic.insert(analytic.end(), res.grad_field.values.begin(), res.grad_field.values.end());
    if (o.corrupt_check == c.name) corrupt(analytic);

    auto f = [&](std::span<const double> w) {
      EmbeddingMatrix e2 = E;
      PixelEmbeddingField f2 = field;
      std::copy(w.begin(), w.begin() + static_cast<long>(e2.values.size()), e2.values.begin());
      std::copy(w.begin() + static_cast<long>(e2.values.size()), w.end(), f2.values.begin());
      return cse_loss(e2, f2, samples).loss;
    };
    merge(c, grad_check(f, params, analytic, kStep));
  }
  return c;
}

AuditCheck audit_roi_align(const AuditOptions& o) {
  AuditCheck c{"roi_align", 0.0, 1e-5};
  for (int k = 0; k < o.seeds; ++k) {
    Rng rng(o.seed * 2000003ull + static_cast<std::uint64_t>(k));
    const FeatureShape shape{rng.uniform_int(1, 2), rng.uniform_int(4, 6), rng.uniform_int(4, 6),
                             rng.uniform(0.5, 1.0)};
    FeatureMap fm(shape);
    for (double& x : fm.values) x = rng.uniform(-1.0, 1.0);
    const double iw = shape.width / shape.spatial_scale, ih = shape.height / shape.spatial_scale;
    const double x1 = rng.uniform(-0.2 * iw, 0.7 * iw), y1 = rng.uniform(-0.2 * ih, 0.7 * ih);
    const Box box{x1, y1, x1 + rng.uniform(0.1, 0.6) * iw, y1 + rng.uniform(0.1, 0.6) * ih};
    const RoiAlignParams params{rng.uniform_int(1, 3), rng.uniform_int(1, 3)};
    RoiFeatures g(shape.channels, params.out_size);
    for (double& x : g.values) x = rng.uniform(-1.0, 1.0);

    auto analytic = roi_align_backward(g, shape, box, params).values;
    if (o.corrupt_check == c.name) corrupt(analytic);
    auto f = [&](std::span<const double> w) {
      FeatureMap m(shape, std::vector<double>(w.begin(), w.end()));
      const auto out = roi_align(m, box, params);
      double s = 0.0;
      for (std::size_t i = 0; i < out.values.size(); ++i) s += out.values[i] * g.values[i];
      return s;
    };
    merge(c, grad_check(f, fm.values, analytic, kStep));
  }
  return c;
}

std::uint64_t mask_hash(const BackboneCache& cache) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& m : cache.active)
    for (char b : m) {
      h ^= static_cast<unsigned char>(b);
      h *= 1099511628211ull;
    }
  for (char b : cache.embed_hidden_active) {
    h ^= static_cast<unsigned char>(b);
    h *= 1099511628211ull;
  }
  return h;
}

AuditCheck audit_backbone(const AuditOptions& o) {
  AuditCheck c{"backbone", 0.0, 1e-4};
  BackboneConfig cfg;
  cfg.image_size = 16;
  cfg.channels = {4, 4};
  cfg.strides = {2, 1};
  cfg.anchors_per_cell = 3;
  cfg.embed_dim = 4;
  for (int k = 0; k < o.seeds; ++k) {
    const std::uint64_t s = o.seed * 3000017ull + static_cast<std::uint64_t>(k);
    cfg.embed_hidden = k % 2 ? 3 : 0;
    cfg.fuse_embed_hidden = k % 4 == 3;
    TinyBackbone net(cfg, s);
    Rng rng(s ^ 0xA5A5A5A5ull);
    // Non-zero biases so the ReLU pattern is not determined by the weights alone.
    for (const auto& layer : net.blocks())
      for (int i = 0; i < layer.shape.out_channels; ++i) net.params()[layer.bias_offset + i] = 0.1 * rng.normal();
    if (net.has_embed_hidden())
      for (int i = 0; i < cfg.embed_hidden; ++i) net.params()[net.embedding_hidden().bias_offset + i] = 0.1 * rng.normal();
    std::vector<double> image(static_cast<std::size_t>(cfg.image_size) * cfg.image_size);
    for (double& x : image) x = rng.uniform(0.0, 1.0);

    BackboneCache cache;
    const auto out = net.forward(image, &cache);
    std::vector<double> r_obj(out.objectness.values.size()), r_del(out.deltas.values.size()),
        r_emb(out.embedding.values.size());
    for (auto* v : {&r_obj, &r_del, &r_emb})
      for (double& x : *v) x = rng.uniform(-1.0, 1.0);

    auto analytic = net.backward(cache, r_obj, r_del, r_emb).params;
    if (o.corrupt_check == c.name) corrupt(analytic);
    const std::vector<double> base(net.params().begin(), net.params().end());
    auto f = [&](std::span<const double> w) {
      TinyBackbone probe = net;
      std::copy(w.begin(), w.end(), probe.params().begin());
      BackboneCache pc;
      const auto po = probe.forward(image, &pc);
      double v = 0.0;
      for (std::size_t i = 0; i < r_obj.size(); ++i) v += r_obj[i] * po.objectness.values[i];
      for (std::size_t i = 0; i < r_del.size(); ++i) v += r_del[i] * po.deltas.values[i];
      for (std::size_t i = 0; i < r_emb.size(); ++i) v += r_emb[i] * po.embedding.values[i];
      return BranchValue{v, mask_hash(pc)};
    };
    merge(c, grad_check_piecewise(f, base, analytic, kStep));
  }
  return c;
}

AuditCheck audit_smooth_l1(const AuditOptions& o) {
  AuditCheck c{"smooth_l1", 0.0, 1e-5};
  const double beta = 1.0 / 9.0;
  for (int k = 0; k < o.seeds; ++k) {
    Rng rng(o.seed * 4000037ull + static_cast<std::uint64_t>(k));
    // Half the points sit close to the switch point on either side.
    std::vector<double> x(16);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      x[i] = i % 2 ? sign * beta * (1.0 + rng.uniform(-0.05, 0.05)) : rng.uniform(-1.0, 1.0);
    }
    std::vector<double> analytic(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) analytic[i] = smooth_l1_grad(x[i], beta);
    if (o.corrupt_check == c.name) corrupt(analytic);
    auto f = [&](std::span<const double> w) {
      BranchValue b;
      for (std::size_t i = 0; i < w.size(); ++i) {
        b.value += smooth_l1(w[i], beta);
        if (std::abs(w[i]) < beta) b.branch |= (1ull << i);
      }
      return b;
    };
    merge(c, grad_check_piecewise(f, x, analytic, kStep));
  }
  return c;
}

}  // namespace

std::vector<AuditCheck> run_gradient_audit(const AuditOptions& options) {
  return {audit_cse(options), audit_roi_align(options), audit_backbone(options), audit_smooth_l1(options)};
}

}  // namespace densedet
