#include "physr/normalize.hpp"

#include <cmath>

namespace physr {

void NormStats::validate() const {
    if (mean.empty() || mean.size() != stddev.size())
        throw DataError("norm stats mean/std length mismatch");
    for (double m : mean)
        if (!std::isfinite(m)) throw DataError("norm stats mean not finite");
    for (double s : stddev)
        if (!(s > 0.0) || !std::isfinite(s))
            throw DataError("norm stats std must be positive and finite");
}

NormStats compute_norm_stats(const std::vector<const FieldSequence*>& seqs) {
    if (seqs.empty()) throw DataError("norm stats need at least one sequence");
    const size_t C = seqs[0]->channels();
    for (const FieldSequence* s : seqs) {
        s->validate();
        if (s->channels() != C || s->channel_names != seqs[0]->channel_names)
            throw DataError("norm stats: sequences disagree on channels");
    }

    NormStats st;
    st.mean.assign(C, 0.0);
    st.stddev.assign(C, 0.0);
    std::vector<double> count(C, 0.0);

    // Pass 1: means.
    for (const FieldSequence* s : seqs) {
        const size_t n = s->grid.num_nodes();
        for (size_t t = 0; t < s->frames(); ++t)
            for (size_t c = 0; c < C; ++c) {
                const float* p = s->values.data() + s->block_offset(t, c);
                double acc = 0.0;
                for (size_t i = 0; i < n; ++i) acc += double(p[i]);
                st.mean[c] += acc;
                count[c] += double(n);
            }
    }
    for (size_t c = 0; c < C; ++c) st.mean[c] /= count[c];

    // Pass 2: population variance about the exact means.
    for (const FieldSequence* s : seqs) {
        const size_t n = s->grid.num_nodes();
        for (size_t t = 0; t < s->frames(); ++t)
            for (size_t c = 0; c < C; ++c) {
                const float* p = s->values.data() + s->block_offset(t, c);
                double acc = 0.0;
                for (size_t i = 0; i < n; ++i) {
                    double d = double(p[i]) - st.mean[c];
                    acc += d * d;
                }
                st.stddev[c] += acc;
            }
    }
    for (size_t c = 0; c < C; ++c) {
        st.stddev[c] = std::sqrt(st.stddev[c] / count[c]);
        if (!(st.stddev[c] > 0.0)) {
            throw DataError("channel '" + seqs[0]->channel_names[c] +
                            "' has zero variance; cannot normalize");
        }
    }
    return st;
}

namespace {

FieldSequence affine(const FieldSequence& seq, const NormStats& stats, bool forward) {
    seq.validate();
    stats.validate();
    if (seq.channels() != stats.channels())
        throw DataError("norm stats cover " + std::to_string(stats.channels()) +
                        " channels but sequence has " + std::to_string(seq.channels()));
    FieldSequence out = seq;
    const size_t n = seq.grid.num_nodes();
    for (size_t t = 0; t < seq.frames(); ++t)
        for (size_t c = 0; c < seq.channels(); ++c) {
            float* p = out.values.data() + out.block_offset(t, c);
            const double mu = stats.mean[c], sd = stats.stddev[c];
            if (forward)
                for (size_t i = 0; i < n; ++i) p[i] = float((double(p[i]) - mu) / sd);
            else
                for (size_t i = 0; i < n; ++i) p[i] = float(double(p[i]) * sd + mu);
        }
    return out;
}

} // namespace

FieldSequence normalize(const FieldSequence& seq, const NormStats& stats) {
    return affine(seq, stats, true);
}

FieldSequence denormalize(const FieldSequence& seq, const NormStats& stats) {
    return affine(seq, stats, false);
}

} // namespace physr
