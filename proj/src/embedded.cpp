namespace singreg {}
