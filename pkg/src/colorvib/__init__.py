"""Imperceptible color-vibration stimuli for unobtrusive gaze guidance.

Submodules:
    colorimetry   CIE xyY/XYZ/sRGB conversions and gamut checks
    vibration     MacAdam-ellipse vibration pair synthesis
    psychometry   psychometric fitting and threshold interpolation
    stimulus      display geometry and frame-pair rendering
    gazeanalysis  homography mapping and gaze metrics
    session       protocol plans, trial state machines, crash-safe log
    service       local HTTP/JSON session service
    cli           command-line entry points
"""

__version__ = "0.1.0"
