#ifndef OTROLL_OTROLL_HPP
#define OTROLL_OTROLL_HPP

#include "otroll/bce.hpp"
#include "otroll/decoder.hpp"
#include "otroll/errors.hpp"
#include "otroll/evaluator.hpp"
#include "otroll/grid.hpp"
#include "otroll/harmonic_mask.hpp"
#include "otroll/matrix.hpp"
#include "otroll/matrix_file.hpp"
#include "otroll/midi.hpp"
#include "otroll/optimize.hpp"
#include "otroll/oracle.hpp"
#include "otroll/ot_loss.hpp"

#endif  // OTROLL_OTROLL_HPP
