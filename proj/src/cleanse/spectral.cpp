#include <Eigen/Dense>
#include <Eigen/SVD>
#include <map>

#include "ultraclean/cleanse.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/parallel.hpp"

namespace ultraclean {

std::vector<double> spectral_scores(const std::vector<std::vector<float>>& feats,
                                    const std::vector<ClassIndex>& labels) {
  if (feats.size() != labels.size()) throw ShapeError("features and labels differ in length");
  std::map<ClassIndex, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::vector<double> scores(feats.size(), 0.0);
  for (const auto& [cls, members] : by_class) {
    if (members.size() < 2) {
      throw UsageError("spectral scoring needs at least 2 samples in class " + std::to_string(cls));
    }
    const auto dim = static_cast<Eigen::Index>(feats[members.front()].size());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(members.size()), dim);
    for (std::size_t r = 0; r < members.size(); ++r) {
      const auto& f = feats[members[r]];
      if (static_cast<Eigen::Index>(f.size()) != dim) throw ShapeError("feature length mismatch");
      for (Eigen::Index c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), c) = f[static_cast<std::size_t>(c)];
    }
    m.rowwise() -= m.colwise().mean();
    if (m.isZero(0.0)) continue;  // identical features: every projection is zero
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinV);
    const Eigen::VectorXd top = svd.matrixV().col(0);
    const Eigen::VectorXd proj = m * top;
    for (std::size_t r = 0; r < members.size(); ++r) {
      const double p = proj(static_cast<Eigen::Index>(r));
      scores[members[r]] = p * p;
    }
  }
  return scores;
}

std::vector<double> spectral_baseline_score(const LabeledDataset& ds, const ModelParams& model,
                                            std::size_t threads) {
  if (!model.trained) throw UsageError("spectral scoring requires a trained model");
  std::vector<std::vector<float>> feats(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) { feats[i] = features(model, ds.images[i]); });
  return spectral_scores(feats, ds.labels);
}

}  // namespace ultraclean
