"""Wave-optics simulation of the log-polar mode sorter and fan-out gratings."""
from .fanout import FanoutSpec, design_fanout, farfield_orders, order_amplitudes
from .field import (ScalarField, fresnel_propagate, lens_ft, make_oam_field,
                    max_angular_spectrum_distance, propagate)
from .sorter import (Crosstalk, SortedProfile, SorterChain, SorterGeometry, crosstalk_from_profiles,
                     crosstalk_matrix, element_masks, strip_extent, wavefront_residual)
