#include "movae/model.hpp"

#include <algorithm>
#include <cmath>

namespace movae {

namespace {

std::string tag2(int i) {
    return (i < 10 ? "0" : "") + std::to_string(i);
}

void init_entry(ParamEntry& e, Rng& rng) {
    const double fan_in = static_cast<double>(e.W.cols());
    const double fan_out = static_cast<double>(e.W.rows());
    const double limit = std::sqrt(6.0 / std::max(1.0, fan_in + fan_out));
    for (Eigen::Index c = 0; c < e.W.cols(); ++c) {
        for (Eigen::Index r = 0; r < e.W.rows(); ++r) {
            e.W(r, c) = limit * (2.0 * rng.uniform() - 1.0);
        }
    }
    e.b.setZero();
}

std::vector<int> spread_widths(int total, int parts) {
    std::vector<int> widths(static_cast<std::size_t>(parts));
    const int base = total / parts;
    const int rem = total % parts;
    for (int i = 0; i < parts; ++i) widths[static_cast<std::size_t>(i)] = base + (i < rem ? 1 : 0);
    return widths;
}

}  // namespace

void ModelConfig::validate() const {
    if (omics_dims.empty()) throw ValidationError("model config: no omics types");
    for (std::size_t k = 0; k < omics_dims.size(); ++k) {
        if (omics_dims[k] < 1) {
            throw ValidationError("model config: omics " + std::to_string(k) + " has no features");
        }
    }
    if (subset_count < 1) throw ValidationError("model config: subset count must be >= 1");
    if (latent_dim < 1) throw ValidationError("model config: latent dim must be >= 1");
    if (branch_hidden < 1 || trunk_hidden < 1 || downstream_hidden < 1) {
        throw ValidationError("model config: hidden widths must be >= 1");
    }
    if (reduction.encoder < 1 || reduction.decoder < 1 || reduction.downstream < 1) {
        throw ValidationError("model config: reduction factors must be >= 1");
    }
    if (class_count < 2) throw ValidationError("model config: need at least 2 classes");
    if (use_subset_identity && subset_count < 2) {
        throw ValidationError("model config: subset identity requires at least 2 subsets");
    }
    if (blocks) {
        const int k = blocks->omics_index;
        if (k < 0 || k >= static_cast<int>(omics_dims.size())) {
            throw ValidationError("model config: block omics index out of range");
        }
        if (static_cast<int>(blocks->feature_blocks.size()) != omics_dims[static_cast<std::size_t>(k)]) {
            throw ValidationError("model config: block assignment covers " +
                                  std::to_string(blocks->feature_blocks.size()) + " features, omics " +
                                  std::to_string(k) + " has " +
                                  std::to_string(omics_dims[static_cast<std::size_t>(k)]));
        }
        if (blocks->block_count < 1) throw ValidationError("model config: block count must be >= 1");
        for (int b : blocks->feature_blocks) {
            if (b < 0 || b >= blocks->block_count) {
                throw ValidationError("model config: block index out of range");
            }
        }
        if (enc_branch_width() < blocks->block_count) {
            throw ValidationError("model config: branch width " +
                                  std::to_string(enc_branch_width()) + " narrower than " +
                                  std::to_string(blocks->block_count) + " blocks");
        }
    }
}

VaeModel assemble_model(const ModelConfig& config, FeaturePartition partition) {
    config.validate();
    if (partition.subset_count != config.subset_count ||
        partition.omics_count() != static_cast<int>(config.omics_dims.size())) {
        throw ValidationError("assemble_model: partition does not match the model config");
    }

    VaeModel m;
    m.config = config;
    m.partition = std::move(partition);

    const int K = static_cast<int>(config.omics_dims.size());
    const int M = config.subset_count;

    // Encoder branch segments: one per block for the block-separated omics,
    // otherwise a single segment over the whole (padded) subset view.
    m.enc_branches.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const bool blocked = config.blocks && config.blocks->omics_index == k;
        const int n_segments = blocked ? config.blocks->block_count : 1;
        const std::vector<int> out_widths = spread_widths(config.enc_branch_width(), n_segments);

        auto& segments = m.enc_branches[static_cast<std::size_t>(k)];
        segments.resize(static_cast<std::size_t>(n_segments));
        for (int s = 0; s < n_segments; ++s) {
            BranchSegment& seg = segments[static_cast<std::size_t>(s)];
            seg.param_name = "enc.branch" + tag2(k) + ".seg" + tag2(s);
            seg.out_width = out_widths[static_cast<std::size_t>(s)];
            seg.view_positions.resize(static_cast<std::size_t>(M));
            for (int j = 0; j < M; ++j) {
                const auto& features =
                    m.partition.subset_features[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                auto& positions = seg.view_positions[static_cast<std::size_t>(j)];
                for (std::size_t p = 0; p < features.size(); ++p) {
                    const int f = features[p];
                    const int block =
                        blocked ? config.blocks->feature_blocks[static_cast<std::size_t>(f)] : 0;
                    if (block == s) positions.push_back(static_cast<int>(p));
                }
                seg.in_width = std::max(seg.in_width, static_cast<int>(positions.size()));
            }
        }
    }

    const int concat_width = K * config.enc_branch_width();
    for (int k = 0; k < K; ++k) {
        for (const auto& seg : m.enc_branches[static_cast<std::size_t>(k)]) {
            m.params.add(seg.param_name, seg.out_width, seg.in_width);
        }
    }
    m.params.add("enc.trunk", config.enc_trunk_width(), concat_width);
    m.params.add("enc.head_mu", config.latent_dim, config.enc_trunk_width());
    m.params.add("enc.head_logvar", config.latent_dim, config.enc_trunk_width());

    m.params.add("dec.trunk", config.dec_trunk_width(), config.latent_input_dim());
    for (int k = 0; k < K; ++k) {
        m.params.add("dec.branch" + tag2(k), config.dec_branch_width(), config.dec_trunk_width());
    }
    for (int k = 0; k < K; ++k) {
        m.params.add("dec.out" + tag2(k), config.omics_dims[static_cast<std::size_t>(k)],
                     config.dec_branch_width());
    }

    m.params.add("down.hidden", config.down_hidden_width(), config.latent_input_dim());
    m.params.add("down.logits", config.class_count, config.down_hidden_width());

    return m;
}

VaeModel build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    VaeModel m = assemble_model(
        config,
        make_partition(config.omics_dims, config.subset_count, seed, config.shuffle_features));
    Rng rng(seed);
    for (auto& [name, entry] : m.params) init_entry(entry, rng);
    return m;
}

EncodeCache encode_forward(const VaeModel& model, const SubsetView& view, const Vector& eps) {
    const int j = view.subset_index;
    const int M = model.config.subset_count;
    if (j < 0 || j >= M) {
        throw std::out_of_range("encode: subset " + std::to_string(j) + " out of range");
    }
    const int K = static_cast<int>(model.config.omics_dims.size());
    if (static_cast<int>(view.per_omics.size()) != K) {
        throw DimensionError("encode: view has " + std::to_string(view.per_omics.size()) +
                             " omics types, model expects " + std::to_string(K));
    }
    for (int k = 0; k < K; ++k) {
        const int expected =
            model.partition.per_subset_dims[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        if (view.per_omics[static_cast<std::size_t>(k)].size() != expected) {
            throw DimensionError("encode: subset " + std::to_string(j) + " omics " +
                                 std::to_string(k) + " has " +
                                 std::to_string(view.per_omics[static_cast<std::size_t>(k)].size()) +
                                 " features, expected " + std::to_string(expected));
        }
    }
    if (eps.size() != model.config.latent_dim) {
        throw DimensionError("encode: eps has length " + std::to_string(eps.size()) +
                             ", latent dim is " + std::to_string(model.config.latent_dim));
    }

    EncodeCache cache;
    cache.subset_index = j;
    cache.seg_inputs.resize(static_cast<std::size_t>(K));
    cache.seg_pre.resize(static_cast<std::size_t>(K));
    cache.branch_concat.resize(static_cast<Eigen::Index>(K) * model.config.enc_branch_width());

    Eigen::Index offset = 0;
    for (int k = 0; k < K; ++k) {
        const Vector& v = view.per_omics[static_cast<std::size_t>(k)];
        for (const auto& seg : model.enc_branches[static_cast<std::size_t>(k)]) {
            const auto& positions = seg.view_positions[static_cast<std::size_t>(j)];
            Vector in = Vector::Zero(seg.in_width);
            for (std::size_t p = 0; p < positions.size(); ++p) {
                in[static_cast<Eigen::Index>(p)] = v[positions[p]];
            }
            const ParamEntry& e = model.params.at(seg.param_name);
            Vector pre = affine(in, e.W, e.b);
            cache.branch_concat.segment(offset, seg.out_width) = pre.cwiseMax(0.0);
            offset += seg.out_width;
            cache.seg_inputs[static_cast<std::size_t>(k)].push_back(std::move(in));
            cache.seg_pre[static_cast<std::size_t>(k)].push_back(std::move(pre));
        }
    }

    const ParamEntry& trunk = model.params.at("enc.trunk");
    cache.trunk_pre = affine(cache.branch_concat, trunk.W, trunk.b);
    cache.trunk_out = cache.trunk_pre.cwiseMax(0.0);

    const ParamEntry& head_mu = model.params.at("enc.head_mu");
    const ParamEntry& head_lv = model.params.at("enc.head_logvar");
    LatentStats& lat = cache.latent;
    lat.mu = affine(cache.trunk_out, head_mu.W, head_mu.b);
    const Vector logvar = affine(cache.trunk_out, head_lv.W, head_lv.b);
    lat.sigma = (0.5 * logvar.array()).exp().matrix();
    lat.eps = eps;
    lat.z = (lat.mu.array() + lat.sigma.array() * eps.array()).matrix();
    return cache;
}

LatentStats encode(const VaeModel& model, const SubsetView& view, const Vector& eps) {
    return encode_forward(model, view, eps).latent;
}

LatentStats encode(const VaeModel& model, const SubsetView& view, Rng& rng) {
    return encode(model, view, rng.normal_vector(model.config.latent_dim));
}

Vector concat_identity(const VectorRef& z, const VectorRef& identity) {
    int ones = 0;
    for (Eigen::Index i = 0; i < identity.size(); ++i) {
        if (identity[i] == 1.0) {
            ++ones;
        } else if (identity[i] != 0.0) {
            throw ValidationError("concat_identity: identity vector is not one-hot");
        }
    }
    if (ones != 1) throw ValidationError("concat_identity: identity vector is not one-hot");
    Vector out(z.size() + identity.size());
    out << z, identity;
    return out;
}

DecodeCache decode_forward(const VaeModel& model, const VectorRef& latent) {
    if (latent.size() != model.config.latent_input_dim()) {
        throw DimensionError("decode: latent has length " + std::to_string(latent.size()) +
                             ", decoder expects " + std::to_string(model.config.latent_input_dim()));
    }
    DecodeCache cache;
    cache.input = latent;
    const ParamEntry& trunk = model.params.at("dec.trunk");
    cache.trunk_pre = affine(cache.input, trunk.W, trunk.b);
    cache.trunk_out = cache.trunk_pre.cwiseMax(0.0);

    const int K = static_cast<int>(model.config.omics_dims.size());
    cache.branch_pre.resize(static_cast<std::size_t>(K));
    cache.branch_out.resize(static_cast<std::size_t>(K));
    cache.recon.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const ParamEntry& branch = model.params.at("dec.branch" + tag2(k));
        const ParamEntry& out = model.params.at("dec.out" + tag2(k));
        Vector& pre = cache.branch_pre[static_cast<std::size_t>(k)];
        pre = affine(cache.trunk_out, branch.W, branch.b);
        Vector& hid = cache.branch_out[static_cast<std::size_t>(k)];
        hid = pre.cwiseMax(0.0);
        Vector head = affine(hid, out.W, out.b);
        cache.recon[static_cast<std::size_t>(k)] =
            model.config.recon_loss == ReconLoss::bce
                ? activation(head, Activation::sigmoid)
                : head;
    }
    return cache;
}

std::vector<Vector> decode(const VaeModel& model, const VectorRef& latent) {
    return decode_forward(model, latent).recon;
}

ClassifyCache classify_forward(const VaeModel& model, const VectorRef& latent) {
    if (latent.size() != model.config.latent_input_dim()) {
        throw DimensionError("classify: latent has length " + std::to_string(latent.size()) +
                             ", downstream expects " +
                             std::to_string(model.config.latent_input_dim()));
    }
    ClassifyCache cache;
    cache.input = latent;
    const ParamEntry& hidden = model.params.at("down.hidden");
    cache.hidden_pre = affine(cache.input, hidden.W, hidden.b);
    cache.hidden_out = cache.hidden_pre.cwiseMax(0.0);
    const ParamEntry& logits = model.params.at("down.logits");
    cache.logits = affine(cache.hidden_out, logits.W, logits.b);
    return cache;
}

Vector classify(const VaeModel& model, const VectorRef& latent) {
    return classify_forward(model, latent).logits;
}

Vector decode_backward(VaeModel& model, const DecodeCache& cache,
                       const std::vector<Vector>& grad_recon) {
    const int K = static_cast<int>(model.config.omics_dims.size());
    if (static_cast<int>(grad_recon.size()) != K) {
        throw DimensionError("decode_backward: gradient covers " +
                             std::to_string(grad_recon.size()) + " omics types, expected " +
                             std::to_string(K));
    }
    Vector dtrunk_out = Vector::Zero(cache.trunk_out.size());
    for (int k = 0; k < K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        Vector dhead = model.config.recon_loss == ReconLoss::bce
                           ? (grad_recon[ku].array() * cache.recon[ku].array() *
                              (1.0 - cache.recon[ku].array()))
                                 .matrix()
                           : grad_recon[ku];
        ParamEntry& out = model.params.at("dec.out" + tag2(k));
        out.grad_W.noalias() += dhead * cache.branch_out[ku].transpose();
        out.grad_b += dhead;
        Vector dhid = out.W.transpose() * dhead;
        Vector dpre = activation_backward(dhid, cache.branch_pre[ku], Activation::relu);
        ParamEntry& branch = model.params.at("dec.branch" + tag2(k));
        branch.grad_W.noalias() += dpre * cache.trunk_out.transpose();
        branch.grad_b += dpre;
        dtrunk_out.noalias() += branch.W.transpose() * dpre;
    }
    Vector dtrunk_pre = activation_backward(dtrunk_out, cache.trunk_pre, Activation::relu);
    ParamEntry& trunk = model.params.at("dec.trunk");
    trunk.grad_W.noalias() += dtrunk_pre * cache.input.transpose();
    trunk.grad_b += dtrunk_pre;
    return trunk.W.transpose() * dtrunk_pre;
}

Vector classify_backward(VaeModel& model, const ClassifyCache& cache,
                         const VectorRef& grad_logits) {
    ParamEntry& logits = model.params.at("down.logits");
    logits.grad_W.noalias() += grad_logits * cache.hidden_out.transpose();
    logits.grad_b += grad_logits;
    Vector dhid = logits.W.transpose() * grad_logits;
    Vector dpre = activation_backward(dhid, cache.hidden_pre, Activation::relu);
    ParamEntry& hidden = model.params.at("down.hidden");
    hidden.grad_W.noalias() += dpre * cache.input.transpose();
    hidden.grad_b += dpre;
    return hidden.W.transpose() * dpre;
}

void encode_backward(VaeModel& model, const EncodeCache& cache, const VectorRef& grad_z,
                     const VectorRef& grad_mu_extra, const VectorRef& grad_logvar_extra) {
    const LatentStats& lat = cache.latent;
    // z = mu + exp(logvar/2) .* eps
    Vector dmu = grad_z + grad_mu_extra;
    Vector dlogvar =
        (grad_z.array() * 0.5 * lat.sigma.array() * lat.eps.array()).matrix() + grad_logvar_extra;

    ParamEntry& head_mu = model.params.at("enc.head_mu");
    head_mu.grad_W.noalias() += dmu * cache.trunk_out.transpose();
    head_mu.grad_b += dmu;
    Vector dtrunk_out = head_mu.W.transpose() * dmu;

    ParamEntry& head_lv = model.params.at("enc.head_logvar");
    head_lv.grad_W.noalias() += dlogvar * cache.trunk_out.transpose();
    head_lv.grad_b += dlogvar;
    dtrunk_out.noalias() += head_lv.W.transpose() * dlogvar;

    Vector dtrunk_pre = activation_backward(dtrunk_out, cache.trunk_pre, Activation::relu);
    ParamEntry& trunk = model.params.at("enc.trunk");
    trunk.grad_W.noalias() += dtrunk_pre * cache.branch_concat.transpose();
    trunk.grad_b += dtrunk_pre;
    Vector dconcat = trunk.W.transpose() * dtrunk_pre;

    Eigen::Index offset = 0;
    const int K = static_cast<int>(model.config.omics_dims.size());
    for (int k = 0; k < K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        for (std::size_t s = 0; s < model.enc_branches[ku].size(); ++s) {
            const BranchSegment& seg = model.enc_branches[ku][s];
            Vector dout = dconcat.segment(offset, seg.out_width);
            offset += seg.out_width;
            Vector dpre = activation_backward(dout, cache.seg_pre[ku][s], Activation::relu);
            ParamEntry& e = model.params.at(seg.param_name);
            e.grad_W.noalias() += dpre * cache.seg_inputs[ku][s].transpose();
            e.grad_b += dpre;
        }
    }
}

namespace {

struct StepOptions {
    bool embed = false;
    bool classify = false;
    int classification_subset = -1;
    int label = -1;
    double embed_weight = 1.0;
    double class_weight = 1.0;
    double kl_weight = 1.0;
    bool accumulate = true;
};

LossBreakdown step_impl(VaeModel& model, const std::vector<Vector>& sample,
                        const std::vector<Vector>& eps_per_subset, const StepOptions& opt) {
    const int M = model.config.subset_count;
    const int q = model.config.latent_dim;
    if (opt.classify) {
        if (opt.classification_subset < 0 || opt.classification_subset >= M) {
            throw std::out_of_range("training step: classification subset out of range");
        }
        if (opt.label < 0 || opt.label >= model.config.class_count) {
            throw std::out_of_range("training step: label " + std::to_string(opt.label) +
                                    " out of range for " +
                                    std::to_string(model.config.class_count) + " classes");
        }
    }
    if (static_cast<int>(eps_per_subset.size()) != M) {
        throw DimensionError("training step: " + std::to_string(eps_per_subset.size()) +
                             " noise draws for " + std::to_string(M) + " subsets");
    }

    LossBreakdown out;
    const double subset_scale = opt.embed_weight / static_cast<double>(M);

    for (int j = 0; j < M; ++j) {
        const bool classify_here = opt.classify && j == opt.classification_subset;
        if (!opt.embed && !classify_here) continue;

        const SubsetView view = extract_subset(sample, model.partition, j);
        const EncodeCache enc = encode_forward(model, view, eps_per_subset[static_cast<std::size_t>(j)]);
        const LatentStats& lat = enc.latent;

        Vector latent_in = model.config.use_subset_identity
                               ? concat_identity(lat.z, subset_identity(M, j))
                               : lat.z;

        Vector grad_z = Vector::Zero(q);
        Vector grad_mu_extra = Vector::Zero(q);
        Vector grad_lv_extra = Vector::Zero(q);

        if (opt.embed) {
            const DecodeCache dec = decode_forward(model, latent_in);

            std::vector<Vector> target;
            std::vector<Vector> output;
            if (model.config.recon_target == ReconTarget::full_input) {
                target = sample;
                output = dec.recon;
            } else {
                target = view.per_omics;
                output.reserve(sample.size());
                for (std::size_t k = 0; k < sample.size(); ++k) {
                    const auto& features =
                        model.partition.subset_features[k][static_cast<std::size_t>(j)];
                    Vector sub(static_cast<Eigen::Index>(features.size()));
                    for (std::size_t p = 0; p < features.size(); ++p) {
                        sub[static_cast<Eigen::Index>(p)] = dec.recon[k][features[p]];
                    }
                    output.push_back(std::move(sub));
                }
            }

            const double recon_j = recon_loss(target, output, model.config.recon_loss);
            const double kl_j = opt.kl_weight * kl_divergence(lat.mu, lat.sigma);
            out.recon += recon_j / static_cast<double>(M);
            out.kl += kl_j / static_cast<double>(M);

            if (opt.accumulate) {
                std::vector<Vector> grad_out =
                    recon_loss_backward(target, output, model.config.recon_loss);
                std::vector<Vector> grad_recon(sample.size());
                for (std::size_t k = 0; k < sample.size(); ++k) {
                    if (model.config.recon_target == ReconTarget::full_input) {
                        grad_recon[k] = subset_scale * grad_out[k];
                    } else {
                        grad_recon[k] = Vector::Zero(sample[k].size());
                        const auto& features =
                            model.partition.subset_features[k][static_cast<std::size_t>(j)];
                        for (std::size_t p = 0; p < features.size(); ++p) {
                            grad_recon[k][features[p]] =
                                subset_scale * grad_out[k][static_cast<Eigen::Index>(p)];
                        }
                    }
                }
                Vector grad_latent_in = decode_backward(model, dec, grad_recon);
                grad_z += grad_latent_in.head(q);
                grad_mu_extra += subset_scale * opt.kl_weight * kl_backward_mu(lat.mu);
                grad_lv_extra += subset_scale * opt.kl_weight * kl_backward_logvar(lat.sigma);
            }
        }

        if (classify_here) {
            const ClassifyCache cls = classify_forward(model, latent_in);
            out.classification = classification_loss(cls.logits, opt.label);
            if (opt.accumulate) {
                Vector grad_logits =
                    opt.class_weight * classification_loss_backward(cls.logits, opt.label);
                Vector grad_latent_in = classify_backward(model, cls, grad_logits);
                grad_z += grad_latent_in.head(q);
            }
        }

        if (opt.accumulate) {
            encode_backward(model, enc, grad_z, grad_mu_extra, grad_lv_extra);
        }
    }

    out.embed = out.recon + out.kl;
    out.joint = out.embed + out.classification;
    return out;
}

}  // namespace

double embed_backprop(VaeModel& model, const std::vector<Vector>& sample,
                      const std::vector<Vector>& eps_per_subset, double weight, double kl_weight) {
    StepOptions opt;
    opt.embed = true;
    opt.embed_weight = weight;
    opt.kl_weight = kl_weight;
    return step_impl(model, sample, eps_per_subset, opt).embed;
}

double classification_backprop(VaeModel& model, const std::vector<Vector>& sample,
                               const Vector& eps, int subset_index, int label, double weight) {
    StepOptions opt;
    opt.classify = true;
    opt.classification_subset = subset_index;
    opt.label = label;
    opt.class_weight = weight;
    std::vector<Vector> eps_list(static_cast<std::size_t>(model.config.subset_count),
                                 Vector::Zero(model.config.latent_dim));
    if (subset_index >= 0 && subset_index < model.config.subset_count) {
        eps_list[static_cast<std::size_t>(subset_index)] = eps;
    }
    return step_impl(model, sample, eps_list, opt).classification;
}

LossBreakdown joint_backprop(VaeModel& model, const std::vector<Vector>& sample,
                             const std::vector<Vector>& eps_per_subset, int classification_subset,
                             int label, double embed_weight, double class_weight,
                             double kl_weight) {
    StepOptions opt;
    opt.embed = true;
    opt.classify = true;
    opt.classification_subset = classification_subset;
    opt.label = label;
    opt.embed_weight = embed_weight;
    opt.class_weight = class_weight;
    opt.kl_weight = kl_weight;
    return step_impl(model, sample, eps_per_subset, opt);
}

LossBreakdown joint_forward(const VaeModel& model, const std::vector<Vector>& sample,
                            const std::vector<Vector>& eps_per_subset, int classification_subset,
                            int label, double kl_weight) {
    StepOptions opt;
    opt.embed = true;
    opt.classify = true;
    opt.classification_subset = classification_subset;
    opt.label = label;
    opt.kl_weight = kl_weight;
    opt.accumulate = false;
    // accumulate=false leaves the model untouched
    return step_impl(const_cast<VaeModel&>(model), sample, eps_per_subset, opt);
}

}  // namespace movae
