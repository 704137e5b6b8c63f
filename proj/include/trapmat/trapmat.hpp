#pragma once

#include "trapmat/cost_model.hpp"
#include "trapmat/delegation.hpp"
#include "trapmat/errors.hpp"
#include "trapmat/lpn.hpp"
#include "trapmat/message.hpp"
#include "trapmat/protocol.hpp"
#include "trapmat/rational.hpp"
#include "trapmat/ring_matrix.hpp"
#include "trapmat/rng.hpp"
#include "trapmat/transport.hpp"
#include "trapmat/trapdoor.hpp"
#include "trapmat/verify.hpp"
#include "trapmat/wire.hpp"
