from .fibres import (ConstructionParams, FGCheck, FibreFamilies, Thm5Result, fibre_families, lemma_fg_expectation_check,
                     theoretical_t, thm5_construct)
from .surgery import PRACTICAL_LADDER, THEORETICAL_LADDER, IntervalSurgery, LadderConfig, lemma7_surgery, maximal_near_interval
from .stickout import ChainResult, StickoutResult, check_stickout_hypotheses, stickout_chain, stickout_search
from .families import PRACTICAL_FAMILIES, THEORETICAL_FAMILIES, FamiliesConfig, IntervalFamilies, lemma10_families, verify_families
from .pipeline import PipelineConfig, PipelineResult, thm1_pipeline
