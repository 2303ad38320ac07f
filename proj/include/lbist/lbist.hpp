#pragma once

// Core library: registers, DUT model, LBIST engine, keyed LBIST and the
// attack toolbox. Remote test management lives under lbist/remote/.

#include "lbist/attack.hpp"
#include "lbist/bitvec.hpp"
#include "lbist/dut.hpp"
#include "lbist/engine.hpp"
#include "lbist/error.hpp"
#include "lbist/galois_register.hpp"
#include "lbist/gf2poly.hpp"
#include "lbist/keyed.hpp"
