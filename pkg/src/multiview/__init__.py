"""Multiview ensembles for image classification.

Each image is rendered into Original, Grey and Skeleton views, one base
classifier is trained per view, and their class probabilities are averaged
(soft voting) before taking the argmax.
"""

__version__ = "0.1.0"
