"""Services: learner nodes, the mediator, transports, learner groups and experiment runs."""
