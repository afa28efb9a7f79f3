#include "marblix/autoencoder.hpp"

#include <algorithm>

namespace marblix {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

const char* direction_name(AeDirection d) {
  return d == AeDirection::ImageToSeq ? "image-to-sequence" : "sequence-to-image";
}

ReconstructionReport reconstruction_report(const HybridAutoencoder<Real>& image_to_seq,
                                           const HybridAutoencoder<Real>& seq_to_image,
                                           const MatrixXr& f_columns, const MatrixXr& g_columns,
                                           const std::vector<std::string>& case_ids) {
  if (image_to_seq.direction != AeDirection::ImageToSeq ||
      seq_to_image.direction != AeDirection::SeqToImage) {
    throw std::invalid_argument("reconstruction_report: models passed in the wrong order");
  }
  const Index n = f_columns.cols();
  if (g_columns.cols() != n || static_cast<Index>(case_ids.size()) != n) {
    throw DimensionError("reconstruction_report: case counts differ");
  }

  MatrixXr recon_g = image_to_seq.net.forward(f_columns);
  MatrixXr recon_f = seq_to_image.net.forward(g_columns);

  ReconstructionReport report;
  std::vector<double> cos_image, cos_sequence;
  double mse_image_sum = 0.0, mse_sequence_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const VectorXr g = g_columns.col(i);
    const VectorXr f = f_columns.col(i);
    const VectorXr rg = recon_g.col(i);
    const VectorXr rf = recon_f.col(i);

    const double c_seq = cosine_similarity<Real>(g, rg);
    const double m_seq = (g - rg).squaredNorm() / static_cast<double>(g.size());
    const double c_img = cosine_similarity<Real>(f, rf);
    const double m_img = (f - rf).squaredNorm() / static_cast<double>(f.size());

    const bool seq_degenerate = std::isnan(c_seq);
    const bool img_degenerate = std::isnan(c_img);
    if (seq_degenerate || img_degenerate) {
      log_warn("reconstruction_report: case '" + case_ids[static_cast<std::size_t>(i)] +
               "' has a zero-norm vector; excluded from the cosine median");
    }
    report.rows.push_back(
        {case_ids[static_cast<std::size_t>(i)], "sequence", c_seq, m_seq, seq_degenerate});
    report.rows.push_back(
        {case_ids[static_cast<std::size_t>(i)], "image", c_img, m_img, img_degenerate});
    if (!seq_degenerate) cos_sequence.push_back(c_seq);
    if (!img_degenerate) cos_image.push_back(c_img);
    mse_sequence_sum += m_seq;
    mse_image_sum += m_img;
  }

  report.median_cosine_image = median(std::move(cos_image));
  report.median_cosine_sequence = median(std::move(cos_sequence));
  report.mean_mse_image = mse_image_sum / static_cast<double>(n);
  report.mean_mse_sequence = mse_sequence_sum / static_cast<double>(n);
  return report;
}

}  // namespace marblix
