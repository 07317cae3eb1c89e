#include "ecl/eval.hpp"

#include <algorithm>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

Tensor batch_of(const std::vector<Example>& examples, std::size_t begin, std::size_t count) {
    const std::size_t d = examples[begin].features.size();
    Tensor out = Tensor::zeros({count, d});
    for (std::size_t i = 0; i < count; ++i) {
        const Example& ex = examples[begin + i];
        if (ex.features.size() != d)
            throw DimensionError("evaluate: inconsistent feature dims");
        std::copy(ex.features.data.begin(), ex.features.data.end(), out.row_ptr(i));
    }
    return out;
}

}  // namespace

EvalResult evaluate(const MlpSpec& spec, const ParamVector& params,
                    const std::vector<Example>& examples, std::size_t batch_size) {
    if (examples.empty()) throw InputError("evaluate: no examples");
    if (batch_size < 1) throw InputError("evaluate: batch_size must be >= 1");
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
        const std::size_t count = std::min(batch_size, examples.size() - begin);
        Tensor batch = batch_of(examples, begin, count);
        std::vector<int> labels(count);
        for (std::size_t i = 0; i < count; ++i) labels[i] = examples[begin + i].label;
        Tensor logits = mlp_forward(spec, params, batch, RunMode::kEval, nullptr);
        LossGrad lg = cross_entropy(logits, labels);
        loss_sum += lg.loss * static_cast<double>(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double* row = logits.row_ptr(i);
            std::size_t best = 0;
            for (std::size_t c = 1; c < logits.cols(); ++c)
                if (row[c] > row[best]) best = c;
            if (static_cast<int>(best) == labels[i]) correct += 1;
        }
    }
    return EvalResult{loss_sum / static_cast<double>(examples.size()),
                      static_cast<double>(correct) / static_cast<double>(examples.size())};
}

Tensor predict_probs(const MlpSpec& spec, const ParamVector& params,
                     const std::vector<Example>& examples, std::size_t batch_size) {
    if (examples.empty()) throw InputError("predict_probs: no examples");
    Tensor out = Tensor::zeros({examples.size(), spec.output_dim});
    for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
        const std::size_t count = std::min(batch_size, examples.size() - begin);
        Tensor batch = batch_of(examples, begin, count);
        Tensor probs = softmax(mlp_forward(spec, params, batch, RunMode::kEval, nullptr));
        for (std::size_t i = 0; i < count; ++i)
            std::copy(probs.row_ptr(i), probs.row_ptr(i) + probs.cols(),
                      out.row_ptr(begin + i));
    }
    return out;
}

PredictionBatch ensemble_probs(const MlpSpec& spec, const std::vector<ParamVector>& members,
                               const std::vector<Example>& examples, std::size_t batch_size) {
    PredictionBatch preds;
    preds.member_probs.reserve(members.size());
    for (const ParamVector& m : members)
        preds.member_probs.push_back(predict_probs(spec, m, examples, batch_size));
    return preds;
}

std::vector<int> combine(const PredictionBatch& preds, Combiner strategy) {
    switch (strategy) {
        case Combiner::kAveraging: return combine_average(preds);
        case Combiner::kHardVote: return combine_hard_vote(preds);
        case Combiner::kMajorityVote: return combine_majority_vote(preds);
    }
    throw InternalError("combine: unknown strategy");
}

double accuracy_of(const std::vector<int>& predicted, const std::vector<Example>& examples) {
    if (predicted.size() != examples.size())
        throw InputError("accuracy_of: prediction count does not match example count");
    if (examples.empty()) throw InputError("accuracy_of: no examples");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < examples.size(); ++i)
        if (predicted[i] == examples[i].label) correct += 1;
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

EvalResult evaluate_batch_ensemble(const MlpSpec& spec, const BatchEnsembleWeights& w,
                                   const std::vector<Example>& examples,
                                   std::size_t batch_size) {
    if (examples.empty()) throw InputError("evaluate_batch_ensemble: no examples");
    std::vector<ParamVector> members;
    members.reserve(w.n);
    for (std::size_t i = 0; i < w.n; ++i)
        members.push_back(batch_ensemble_member(spec, w, i));
    PredictionBatch preds = ensemble_probs(spec, members, examples, batch_size);
    std::vector<int> labels = combine_average(preds);
    // loss of the averaged probabilities, for path/robustness style reporting
    double loss_sum = 0.0;
    for (std::size_t r = 0; r < examples.size(); ++r) {
        double p = 0.0;
        for (std::size_t i = 0; i < preds.n(); ++i)
            p += preds.member_probs[i].at(r, static_cast<std::size_t>(examples[r].label));
        p /= static_cast<double>(preds.n());
        loss_sum += -std::log(std::max(p, 1e-300));
    }
    return EvalResult{loss_sum / static_cast<double>(examples.size()),
                      accuracy_of(labels, examples)};
}

}  // namespace ecl
