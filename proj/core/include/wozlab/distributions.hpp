#pragma once

namespace wozlab {

/// I_x(a, b), evaluated by Lentz's continued fraction. a, b > 0; x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

/// P(F >= f) for the F distribution with (d1, d2) degrees of freedom.
double f_upper_tail(double f, double d1, double d2);

}  // namespace wozlab
