#include "stefan/field.hpp"

namespace stefan {

Field::Field(const expr::Expr& e) {
    if (e.is_constant()) {
        constant_ = e.eval(0.0, 0.0);
    } else {
        fn_ = [e](double x, double t) { return e.eval(x, t); };
    }
}

}  // namespace stefan
