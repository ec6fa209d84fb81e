#pragma once

#include <Eigen/Dense>

namespace fedsim {

// One client's uploaded item-gradient matrix. `is_malicious` is an
// oracle flag for tests and diagnostics only; no defense reads it.
struct ClientUpdate {
    int client_id = 0;
    Eigen::MatrixXd item_grad;  // M x d
    bool is_malicious = false;
};

}  // namespace fedsim
