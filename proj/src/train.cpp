#include "ambc/train.hpp"

#include <fstream>
#include <limits>
#include <sstream>

namespace ambc {

void TrainOptions::validate() const {
  if (batch_size < 1) throw ParameterError("batch_size must be at least 1");
  if (max_epochs < 0) throw ParameterError("max_epochs must be non-negative");
  if (patience < 1) throw ParameterError("patience must be at least 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ParameterError("val_fraction must lie in (0, 1)");
  if (!(optimizer.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ParameterError("lr_decay must lie in (0, 1]");
}

double TrainHistory::best_val_loss_mean() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : epochs) best = std::min(best, e.val_loss_mean);
  return best;
}

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,train_loss,val_loss,is_best\n";
  for (const auto& e : epochs)
    os << e.epoch << ',' << e.train_loss_mean << ',' << e.val_loss_mean << ',' << (e.is_best ? 1 : 0) << '\n';
  return os.str();
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << to_csv();
}

}  // namespace ambc
