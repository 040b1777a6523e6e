"""secplan: hardware security threat modeling and test plan generation engine.

Two pipelines over one session model:

* the physical / supply-chain flow interrogates a verification engineer,
  assesses a predefined threat catalog against retrieved attack knowledge,
  and prunes threats that do not apply to the design;
* the software-exploitable flow mines design specs and ISA manuals for
  security policies and classifies their risks.

Both feed a test plan generator that turns the surviving threats or mined
policies into schema-validated, per-modality test cases.
"""

__version__ = "0.1.0"
